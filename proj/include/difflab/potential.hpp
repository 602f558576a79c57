#pragma once

#include "difflab/model.hpp"
#include "difflab/quad.hpp"
#include "difflab/scale_speed.hpp"

namespace difflab {

/// [a, b] inside the state space.
class CompactWindow {
public:
    /// Throws DomainError unless a < b and both lie in J.
    CompactWindow(double a, double b, const Interval& domain);

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    bool in_interior(double x) const noexcept { return x > a_ && x < b_; }

private:
    double a_;
    double b_;
};

struct PotentialOptions {
    quad::Tolerance tol{1e-11, 1e-14};
};

/// P_x(tau_b < tau_a). Throws DomainError unless a < x < b.
double hitting_probability(const ScaleSpeed& ss, double x, const CompactWindow& w);

/// Green kernel of the window; zero outside (a,b) x (a,b). Symmetric in x and y.
double green_function(const ScaleSpeed& ss, const CompactWindow& w, double x, double y);

/// E_x[tau_a ^ tau_b].
quad::Estimate expected_exit_time(const ScaleSpeed& ss, const CompactWindow& w, double x,
                                  const PotentialOptions& options = {});

/// E_x of the integral of f(X) up to the exit time. Throws NegativeIntegrand if f < 0 is sampled.
quad::Estimate expected_occupation(const ScaleSpeed& ss, const CompactWindow& w, double x, const RealFunction& f,
                                   const PotentialOptions& options = {});

/// Expected time spent at the left boundary l before tau_a, started from l:
/// 2 (s(a) - s(l)) m({l}). Infinite for an absorbing atom.
/// Throws PreconditionError unless the left boundary is regular with an atom.
double boundary_occupation(const DiffusionSpec& spec, double a, const ScaleOptions& options = {});

}  // namespace difflab
