#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "difflab/model.hpp"
#include "difflab/scale_speed.hpp"

namespace difflab {

/// Grid and truncation controls for the eigenfunction solver. Node spacing is
/// the smaller of kappa times the local decay length 1/sqrt(2 alpha density)
/// and delta times the distance from the anchor (or to a finite end).
struct GridPolicy {
    double kappa = 0.03;
    double delta = 0.02;
    double phase_cutoff = 40.0;  // stop a side once the accumulated decay exponent exceeds this
    double reach = 1e12;         // infinite sides: stop at reach times the base length
    double closeness = 1e-15;    // finite sides: stop this close (relative) to the end
    int max_nodes_per_side = 2048;
    int doublings = 2;           // refinements tried when truncation marching does not converge
    int stride = 16;             // nodes between successive truncation levels
    double tol = 1e-10;          // Cauchy tolerance on the probe nodes

    std::string describe() const;
};

/// Increasing and decreasing alpha-eigenfunctions on a natural-scale grid,
/// normalized to 1 at the anchor.
class GFunctionPair {
public:
    double alpha() const noexcept { return alpha_; }
    double anchor() const noexcept { return x_[anchor_]; }
    const Interval& domain() const noexcept { return domain_; }
    /// Base lengths used for the grid on each side of the anchor.
    double base_left() const noexcept { return base_left_; }
    double base_right() const noexcept { return base_right_; }
    const std::vector<double>& grid() const noexcept { return x_; }
    const std::vector<double>& g1() const noexcept { return g1_; }
    const std::vector<double>& g2() const noexcept { return g2_; }
    /// Dual-cell masses m((x_{i-1/2}, x_{i+1/2}]).
    const std::vector<double>& masses() const noexcept { return dual_; }

    std::vector<double> g1_right_derivative() const;
    std::vector<double> g2_right_derivative() const;

    /// Range of x where E_x[exp(-alpha tau_y)] is certified.
    std::pair<double, double> hull() const;
    /// Ranges where g1 and g2 themselves are available.
    std::pair<double, double> g1_range() const;
    std::pair<double, double> g2_range() const;

    double g1_at(double x) const;
    double g2_at(double x) const;

    /// g2 g1+ - g1 g2+ on the nodes where both are certified.
    std::vector<double> wronskian() const;
    /// max |B_i - mean| / mean.
    double wronskian_variation() const;
    /// Largest relative residual of the three-point equations over the certified range.
    double residual() const;
    /// Discrete monotonicity, positivity and convexity over the certified range.
    bool shape_ok() const;

    int truncation_levels() const noexcept { return levels_; }
    int refinements() const noexcept { return refinements_; }

private:
    friend GFunctionPair solve_laplace(const ScaleSpeedSpec&, double, double, const GridPolicy&);
    GFunctionPair() = default;

    double interpolate(const std::vector<double>& g, std::size_t lo, std::size_t hi, double x) const;

    double alpha_ = 0.0;
    Interval domain_ = Interval::real_line();
    double base_left_ = 0.0, base_right_ = 0.0;
    std::size_t anchor_ = 0;
    std::vector<double> x_, g1_, g2_, dual_, cell_;
    std::size_t g1_lo_ = 0, g1_hi_ = 0, g2_lo_ = 0, g2_hi_ = 0;  // defined ranges, inclusive
    std::size_t cert_lo_ = 0, cert_hi_ = 0;                     // certified ranges, inclusive
    int levels_ = 0;
    int refinements_ = 0;
};

/// Solves (1/2alpha) d/dm d+/dx g = g on natural scale by truncation marching.
/// Throws PreconditionError unless the model is on natural scale, alpha > 0 and
/// y is interior; NoConvergence when marching fails; SolverError on a bad pivot.
GFunctionPair solve_laplace(const ScaleSpeedSpec& natural, double alpha, double y, const GridPolicy& policy = {});

/// E_x[exp(-alpha tau_y)] for x in the certified hull. Throws OutOfGrid outside.
double laplace_hitting(const GFunctionPair& pair, double x);

enum class LimitVerdict { Vanishes, Positive, Inconclusive };
const char* to_string(LimitVerdict v) noexcept;

struct LimitProfile {
    Side side = Side::Left;
    std::vector<double> points;
    std::vector<double> values;
    std::vector<double> ratios;
    LimitVerdict verdict = LimitVerdict::Inconclusive;
    double limit = 0.0;  // extrapolated limit
    bool monotone = true;
};

/// Three consecutive trailing ratios below 0.5 give Vanishes. Above 0.9 gives Positive
/// when their log-decrements also contract by at least 0.7 per step.
LimitVerdict limit_verdict(const std::vector<double>& values, const std::vector<double>& ratios) noexcept;

/// Decisive verdicts must agree; otherwise, or when none is decisive, Inconclusive.
LimitVerdict combine_verdicts(const std::vector<LimitVerdict>& verdicts) noexcept;

/// E_x[exp(-alpha tau_y)] along x approaching the boundary on each side.
LimitProfile fd_limit_check(const GFunctionPair& pair, Side side);

/// |z| E_x[exp(-alpha tau_z)] as z runs toward an infinite boundary on the given side.
/// Throws PreconditionError if that boundary is finite.
LimitProfile mart_limit_check(const GFunctionPair& pair, Side side, std::optional<double> x = std::nullopt);

struct PicardOptions {
    double delta = 0.001;
    double reach = 1e12;
    double closeness = 1e-15;
};

struct PicardSeries {
    Side side = Side::Right;
    double alpha = 0.0;
    std::vector<double> x;
    std::vector<std::vector<double>> u;  // u[0] = 1, u[n] the n-th iterated tail integral
    std::vector<double> g;               // sum of (2 alpha)^n u[n]

    /// u_n <= u_1^n / n! on every node for n = 1..u.size()-1.
    bool bound_holds(double rel = 1e-9) const;
    /// 1 + 2 alpha u_1 <= g <= exp(2 alpha u_1) on every node.
    bool sandwich_holds(double rel = 1e-9) const;
};

/// Decreasing eigenfunction with unit limit at a non-natural boundary, from x = start
/// toward the boundary on the given side. HypothesisError for a natural boundary,
/// DivergentTail when u_1 is infinite.
PicardSeries picard_series(const ScaleSpeedSpec& natural, double alpha, Side side, int n_max, double start,
                           const PicardOptions& options = {});

/// max ratio / min ratio - 1 of picard.g against the solver's eigenfunction on the
/// common certified range (g2 toward the right, g1 toward the left).
double picard_spread(const PicardSeries& picard, const GFunctionPair& pair);

/// Laplace transforms in the original coordinates of any spec.
class LaplaceSolver {
public:
    explicit LaplaceSolver(const DiffusionSpec& spec, const GridPolicy& policy = {},
                           std::optional<double> reference_point = std::nullopt);

    const ScaleSpeedSpec& natural() const noexcept { return natural_; }
    /// Natural-scale coordinate of x.
    double to_natural(double x) const;
    GFunctionPair solve(double alpha, double y) const;
    /// E_x[exp(-alpha tau_y)].
    double transform(double alpha, double x, double y) const;

private:
    ScaleSpeed ss_;
    ScaleSpeedSpec natural_;
    bool identity_;
    GridPolicy policy_;
};

}  // namespace difflab
