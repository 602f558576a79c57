#pragma once

#include <functional>
#include <string>
#include <vector>

namespace difflab::quad {

struct Tolerance {
    double rel = 1e-8;
    double abs = 1e-12;

    double bound(double value) const noexcept;
};

using Integrand = std::function<double(double)>;

struct Estimate {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    int intervals = 0;
};

/// One 21-point Gauss-Kronrod panel on [a,b]. Never evaluates f at a or b.
Estimate gauss_kronrod(const Integrand& f, double a, double b);

/// Globally adaptive Gauss-Kronrod on [a,b] (a < b).
/// Throws ExpressionError if f is non-finite at a node even after nudging,
/// QuadratureError if the subdivision limit is reached before the tolerance.
Estimate integrate_compact(const Integrand& f, double a, double b, const Tolerance& tol = {},
                           int max_intervals = 4000);

struct Verdict {
    enum class Outcome { Finite, Diverges, Inconclusive };

    Outcome outcome = Outcome::Inconclusive;
    double value = 0.0;  // extrapolated value when Finite, last partial sum otherwise
    double error = 0.0;
    std::vector<double> partial_sums;
    std::string reason;

    bool finite() const noexcept { return outcome == Outcome::Finite; }
    bool diverges() const noexcept { return outcome == Outcome::Diverges; }
    bool inconclusive() const noexcept { return outcome == Outcome::Inconclusive; }
};

const char* to_string(Verdict::Outcome outcome) noexcept;

struct ImproperOptions {
    int stages = 60;
    double blow_up = 1e8;
    int run_length = 16;     // consecutive non-decreasing increments that count as divergence
    double slack = 1e-6;     // relative slack in "non-decreasing"
    double width = 0.0;      // first cut distance toward an infinite endpoint; 0 picks max(1, |a|)
};

/// Integral of a non-negative f over the open interval between a and
/// endpoint (either order; endpoint may be infinite), evaluated on an
/// exhausting sequence of compact intervals.
/// Throws NegativeIntegrand when a sample is below -tol.abs.
Verdict integrate_improper(const Integrand& f, double a, double endpoint, const Tolerance& tol = {},
                           const ImproperOptions& options = {});

}  // namespace difflab::quad
