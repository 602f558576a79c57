#pragma once

#include <optional>
#include <string>
#include <vector>

#include "difflab/model.hpp"
#include "difflab/quad.hpp"
#include "difflab/scale_speed.hpp"

namespace difflab {

enum class Kind { Regular, Exit, Entrance, Natural, Inconclusive };
enum class RegularSubtype { Absorbing, SlowlyReflecting, InstantaneouslyReflecting };
enum class Answer { Yes, No, Inconclusive };

const char* to_string(Kind kind) noexcept;
const char* to_string(RegularSubtype subtype) noexcept;
const char* to_string(Answer answer) noexcept;

/// Kind from the finiteness pattern of (u, v).
Kind kind_from(const quad::Verdict& u, const quad::Verdict& v) noexcept;
RegularSubtype subtype_from(const AtomMass& atom) noexcept;

struct BoundaryClass {
    Side side = Side::Left;
    double endpoint = 0.0;
    Kind kind = Kind::Inconclusive;
    std::optional<RegularSubtype> subtype;
    std::optional<AtomMass> atom;
    bool atom_defaulted = false;  // regular boundary without a supplied atom
    quad::Verdict u;
    quad::Verdict v;

    /// Regular and exit boundaries belong to the state space.
    bool closed() const noexcept { return kind == Kind::Regular || kind == Kind::Exit; }
};

struct PropertyVerdict {
    Answer fd = Answer::Inconclusive;
    Answer martingale = Answer::Inconclusive;
    std::vector<std::string> rationale;
};

struct ClassifyOptions {
    quad::Tolerance tol;
    std::optional<double> reference_point;
    ScaleOptions scale;
};

/// Integral of m((c,z]) s'(z) from c toward the boundary (mirrored on the left).
quad::Verdict u_integral(const ScaleSpeed& ss, Side side, const quad::Tolerance& tol = {});
/// Integral of |s(y) - s(c)| m(dy) from c toward the boundary.
quad::Verdict v_integral(const ScaleSpeed& ss, Side side, const quad::Tolerance& tol = {});

BoundaryClass classify_boundary(const ScaleSpeed& ss, Side side, const quad::Tolerance& tol = {});
BoundaryClass classify_boundary(const DiffusionSpec& spec, Side side, const ClassifyOptions& options = {});

/// FD and martingale verdicts. An entrance boundary decides No; otherwise
/// any inconclusive boundary makes both verdicts inconclusive.
PropertyVerdict decide_properties(const BoundaryClass& left, const BoundaryClass& right);

struct AnalysisReport {
    std::string model;
    Interval domain = Interval::real_line();
    double reference_point = 0.0;
    int grid_size = 0;
    quad::Tolerance tol;
    BoundaryClass left;
    BoundaryClass right;
    PropertyVerdict properties;
    std::vector<std::string> diagnostics;
    std::vector<std::string> catalog_matches;  // catalog entries with the same coefficients and domain
};

AnalysisReport analyze(const DiffusionSpec& spec, const ClassifyOptions& options = {});

}  // namespace difflab
