#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "difflab/expr.hpp"

namespace difflab {

enum class Side { Left, Right };

const char* to_string(Side side) noexcept;

/// Extended real interval with open/closed ends. An infinite end is never closed.
class Interval {
public:
    /// Throws DomainError when the invariants fail.
    Interval(double left, double right, bool left_closed = false, bool right_closed = false);

    static Interval real_line();
    static Interval positive_half_line();

    double left() const noexcept { return left_; }
    double right() const noexcept { return right_; }
    double end(Side s) const noexcept { return s == Side::Left ? left_ : right_; }
    bool left_closed() const noexcept { return left_closed_; }
    bool right_closed() const noexcept { return right_closed_; }
    bool closed(Side s) const noexcept { return s == Side::Left ? left_closed_ : right_closed_; }
    bool finite(Side s) const noexcept;

    bool in_interior(double x) const noexcept { return x > left_ && x < right_; }
    bool contains(double x) const noexcept;

    std::string to_string() const;

    friend bool operator==(const Interval&, const Interval&) = default;

private:
    double left_;
    double right_;
    bool left_closed_;
    bool right_closed_;
};

/// Mass of a boundary atom: a non-negative real or an exact infinity tag.
class AtomMass {
public:
    static AtomMass infinite() noexcept { return AtomMass(0.0, true); }
    /// Throws DomainError for negative or non-finite input.
    static AtomMass finite(double mass);

    bool is_infinite() const noexcept { return infinite_; }
    /// +inf for the infinite tag.
    double value() const noexcept;

    std::string to_string() const;

    friend bool operator==(const AtomMass&, const AtomMass&) = default;

private:
    AtomMass(double v, bool inf) : value_(v), infinite_(inf) {}
    double value_;
    bool infinite_;
};

struct SpeedAtom {
    Side side;
    AtomMass mass;
};

std::optional<AtomMass> atom_on(const std::vector<SpeedAtom>& atoms, Side side);

struct CoefficientSpec {
    expr::Expr drift;
    expr::Expr diffusion;
    Interval domain;
};

using RealFunction = std::function<double(double)>;

/// Scale and speed given directly.
///
/// `speed_mass(a, b)`, when present, returns m((a,b]) for interior a <= b and
/// is preferred over integrating the density.
struct ScaleSpeedSpec {
    RealFunction scale;
    RealFunction scale_derivative;
    RealFunction speed_density;
    Interval domain;
    std::vector<SpeedAtom> atoms;
    std::function<double(double, double)> speed_mass;
    bool natural = false;  // scale is the identity
};

struct ItoDiffusion {
    CoefficientSpec coefficients;
    std::vector<SpeedAtom> atoms;
};

struct DiffusionSpec {
    std::variant<ItoDiffusion, ScaleSpeedSpec> data;
    std::optional<std::string> name;

    const Interval& domain() const noexcept;
    const std::vector<SpeedAtom>& atoms() const noexcept;
    bool is_ito() const noexcept { return std::holds_alternative<ItoDiffusion>(data); }
    const ItoDiffusion& ito() const { return std::get<ItoDiffusion>(data); }
    const ScaleSpeedSpec& direct() const { return std::get<ScaleSpeedSpec>(data); }
    std::string label() const { return name.value_or("<unnamed>"); }
};

DiffusionSpec make_ito(std::string name, const std::string& drift, const std::string& sigma, Interval domain,
                       std::vector<SpeedAtom> atoms = {});

/// Deterministic interior sample grid accumulating geometrically toward both ends.
std::vector<double> sample_grid(const Interval& domain, int grid_size);

/// Empty when every invariant holds on the sample grid.
/// Throws ExpressionError when a coefficient hits a domain error at an interior point.
std::vector<std::string> validate(const DiffusionSpec& spec, int grid_size = 512);

struct CatalogEntry {
    std::string name;
    std::string summary;
    DiffusionSpec spec;
};

std::vector<CatalogEntry> catalog(double cev_beta = 2.0);

/// Throws DomainError for an unknown name.
DiffusionSpec catalog_lookup(const std::string& name, double cev_beta = 2.0);

DiffusionSpec cev(double beta);

/// Key = value model files. Throws ModelFileError.
DiffusionSpec parse_model(const std::string& text, const std::string& origin = "<string>");
DiffusionSpec load_model(const std::string& path);

}  // namespace difflab
