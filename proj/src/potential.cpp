#include "difflab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "difflab/classify.hpp"
#include "difflab/errors.hpp"

namespace difflab {

CompactWindow::CompactWindow(double a, double b, const Interval& domain) : a_(a), b_(b) {
    if (!(a < b)) throw DomainError("window needs a < b");
    if (!domain.contains(a) || !domain.contains(b))
        throw DomainError("window [" + std::to_string(a) + ", " + std::to_string(b) + "] is not inside " +
                          domain.to_string());
}

namespace {

void require_inside(const CompactWindow& w, double x) {
    if (!w.in_interior(x))
        throw DomainError("x = " + std::to_string(x) + " is not inside (" + std::to_string(w.a()) + ", " +
                          std::to_string(w.b()) + ")");
}

quad::Estimate occupation(const ScaleSpeed& ss, const CompactWindow& w, double x, const RealFunction* f,
                          const PotentialOptions& options) {
    require_inside(w, x);
    const auto& s = ss.scale;
    const double span = s.increment(w.a(), w.b());
    const double right_factor = 2.0 * s.increment(x, w.b()) / span;
    const double left_factor = 2.0 * s.increment(w.a(), x) / span;
    auto weight = [&](double y) {
        const double d = ss.speed.density(y);
        if (!f) return d;
        const double fy = (*f)(y);
        if (fy < -options.tol.abs) throw NegativeIntegrand("occupation function is negative at " + std::to_string(y));
        return d * std::max(fy, 0.0);
    };
    const auto lower = quad::integrate_compact(
        [&](double y) { return right_factor * s.increment(w.a(), y) * weight(y); }, w.a(), x, options.tol);
    const auto upper = quad::integrate_compact(
        [&](double y) { return left_factor * s.increment(y, w.b()) * weight(y); }, x, w.b(), options.tol);
    quad::Estimate e;
    e.value = lower.value + upper.value;
    e.error = lower.error + upper.error;
    e.evaluations = lower.evaluations + upper.evaluations;
    e.intervals = lower.intervals + upper.intervals;
    return e;
}

}  // namespace

double hitting_probability(const ScaleSpeed& ss, double x, const CompactWindow& w) {
    require_inside(w, x);
    const double p = ss.scale.increment(w.a(), x) / ss.scale.increment(w.a(), w.b());
    return std::clamp(p, 0.0, 1.0);
}

double green_function(const ScaleSpeed& ss, const CompactWindow& w, double x, double y) {
    if (!w.in_interior(x) || !w.in_interior(y)) return 0.0;
    const double lo = std::min(x, y), hi = std::max(x, y);
    const auto& s = ss.scale;
    return 2.0 * s.increment(w.a(), lo) * s.increment(hi, w.b()) / s.increment(w.a(), w.b());
}

quad::Estimate expected_exit_time(const ScaleSpeed& ss, const CompactWindow& w, double x,
                                  const PotentialOptions& options) {
    return occupation(ss, w, x, nullptr, options);
}

quad::Estimate expected_occupation(const ScaleSpeed& ss, const CompactWindow& w, double x, const RealFunction& f,
                                   const PotentialOptions& options) {
    return occupation(ss, w, x, &f, options);
}

double boundary_occupation(const DiffusionSpec& spec, double a, const ScaleOptions& options) {
    const Interval& d = spec.domain();
    if (!d.in_interior(a)) throw DomainError("a must lie in the interior");
    const ScaleSpeed ss = build_scale_speed(spec, std::nullopt, options);
    const BoundaryClass left = classify_boundary(ss, Side::Left);
    if (left.kind != Kind::Regular) throw PreconditionError("left boundary is " + std::string(to_string(left.kind)));
    if (!left.atom) throw PreconditionError("no atom given at the left boundary");
    if (left.atom->is_infinite()) return std::numeric_limits<double>::infinity();
    const double ds = ss.scale(a) - ss.scale.end_value(Side::Left);
    return 2.0 * ds * left.atom->value();
}

}  // namespace difflab
