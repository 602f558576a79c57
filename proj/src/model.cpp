#include "difflab/model.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const char* to_string(Side side) noexcept { return side == Side::Left ? "left" : "right"; }

Interval::Interval(double left, double right, bool left_closed, bool right_closed)
    : left_(left), right_(right), left_closed_(left_closed), right_closed_(right_closed) {
    if (std::isnan(left) || std::isnan(right)) throw DomainError("interval endpoint is NaN");
    if (!(left < right)) throw DomainError("interval needs left < right, got " + to_string());
    if ((left_closed && std::isinf(left)) || (right_closed && std::isinf(right)))
        throw DomainError("an infinite endpoint cannot be closed: " + to_string());
}

Interval Interval::real_line() { return Interval(-inf, inf); }
Interval Interval::positive_half_line() { return Interval(0.0, inf); }

bool Interval::finite(Side s) const noexcept { return std::isfinite(end(s)); }

bool Interval::contains(double x) const noexcept {
    if (in_interior(x)) return true;
    return (x == left_ && left_closed_) || (x == right_ && right_closed_);
}

std::string Interval::to_string() const {
    return std::string(left_closed_ ? "[" : "(") + fmt(left_) + ", " + fmt(right_) + (right_closed_ ? "]" : ")");
}

AtomMass AtomMass::finite(double mass) {
    if (!(mass >= 0.0) || std::isinf(mass)) throw DomainError("atom mass must be finite and non-negative");
    return AtomMass(mass, false);
}

double AtomMass::value() const noexcept { return infinite_ ? inf : value_; }

std::string AtomMass::to_string() const { return infinite_ ? "inf" : fmt(value_); }

std::optional<AtomMass> atom_on(const std::vector<SpeedAtom>& atoms, Side side) {
    for (const auto& a : atoms)
        if (a.side == side) return a.mass;
    return std::nullopt;
}

const Interval& DiffusionSpec::domain() const noexcept {
    if (const auto* i = std::get_if<ItoDiffusion>(&data)) return i->coefficients.domain;
    return std::get<ScaleSpeedSpec>(data).domain;
}

const std::vector<SpeedAtom>& DiffusionSpec::atoms() const noexcept {
    if (const auto* i = std::get_if<ItoDiffusion>(&data)) return i->atoms;
    return std::get<ScaleSpeedSpec>(data).atoms;
}

DiffusionSpec make_ito(std::string name, const std::string& drift, const std::string& sigma, Interval domain,
                       std::vector<SpeedAtom> atoms) {
    return DiffusionSpec{
        ItoDiffusion{CoefficientSpec{expr::Expr::parse(drift), expr::Expr::parse(sigma), domain}, std::move(atoms)},
        std::move(name)};
}

std::vector<double> sample_grid(const Interval& domain, int grid_size) {
    if (grid_size < 3) throw PreconditionError("grid_size must be at least 3");
    const double l = domain.left();
    const double r = domain.right();
    double center;
    if (std::isfinite(l) && std::isfinite(r))
        center = 0.5 * (l + r);
    else if (std::isfinite(l))
        center = l + 1.0;
    else if (std::isfinite(r))
        center = r - 1.0;
    else
        center = 0.0;

    const int per_side = (grid_size - 1) / 2;
    std::vector<double> left_pts, right_pts;
    auto side_points = [&](double end, double dir, std::vector<double>& out) {
        for (int k = 1; k <= per_side; ++k) {
            const double t = static_cast<double>(k) / per_side;
            double x;
            if (std::isinf(end))
                x = center + dir * std::pow(10.0, -3.0 + 15.0 * t);
            else
                x = end - dir * std::fabs(center - end) * std::pow(10.0, -12.0 * t);
            if (domain.in_interior(x)) out.push_back(x);
        }
    };
    side_points(l, -1.0, left_pts);
    side_points(r, 1.0, right_pts);

    std::vector<double> grid(left_pts.rbegin(), left_pts.rend());
    grid.push_back(center);
    grid.insert(grid.end(), right_pts.begin(), right_pts.end());
    std::vector<double> unique;
    for (double x : grid)
        if (unique.empty() || x > unique.back()) unique.push_back(x);
    return unique;
}

std::vector<std::string> validate(const DiffusionSpec& spec, int grid_size) {
    std::vector<std::string> violations;
    const Interval& d = spec.domain();
    const auto grid = sample_grid(d, grid_size);

    for (const auto& atom : spec.atoms()) {
        if (!d.finite(atom.side))
            violations.push_back(std::string("atom attached to infinite ") + to_string(atom.side) + " endpoint");
    }
    for (Side s : {Side::Left, Side::Right}) {
        int count = 0;
        for (const auto& atom : spec.atoms()) count += atom.side == s;
        if (count > 1) violations.push_back(std::string("more than one atom on the ") + to_string(s) + " endpoint");
    }

    if (const auto* ito = std::get_if<ItoDiffusion>(&spec.data)) {
        const auto& c = ito->coefficients;
        auto check = [&](const expr::Expr& e, const char* what, double x) {
            const auto v = e.evaluate(x);
            if (v.status == expr::Value::Status::Domain)
                throw ExpressionError(std::string(what) + " \"" + e.source() + "\" is undefined at interior point " +
                                      fmt(x));
            if (v.status == expr::Value::Status::Infinite) {
                violations.push_back(std::string(what) + " is not finite at interior point " + fmt(x));
                return false;
            }
            return true;
        };
        for (double x : grid) {
            check(c.drift, "drift", x);
            if (check(c.diffusion, "sigma", x) && c.diffusion(x) == 0.0)
                violations.push_back("sigma vanishes at interior point " + fmt(x));
        }
        return violations;
    }

    const auto& ss = std::get<ScaleSpeedSpec>(spec.data);
    if (!ss.scale || !ss.speed_density) {
        violations.push_back("scale and speed density must both be supplied");
        return violations;
    }
    double prev = -inf;
    for (double x : grid) {
        const double s = ss.scale(x);
        const double dens = ss.speed_density(x);
        if (std::isnan(s) || std::isnan(dens))
            throw ExpressionError("scale or speed density undefined at interior point " + fmt(x));
        if (!std::isfinite(s))
            violations.push_back("scale is not finite at interior point " + fmt(x));
        else if (!(s > prev))
            violations.push_back("scale is not strictly increasing at " + fmt(x));
        if (std::isfinite(s)) prev = s;
        if (!(dens > 0.0) || !std::isfinite(dens))
            violations.push_back("speed density is not positive and finite at interior point " + fmt(x));
        if (ss.scale_derivative) {
            const double ds = ss.scale_derivative(x);
            if (std::isnan(ds)) throw ExpressionError("scale derivative undefined at interior point " + fmt(x));
            if (!(ds > 0.0) || !std::isfinite(ds))
                violations.push_back("scale derivative is not positive and finite at " + fmt(x));
        }
    }
    return violations;
}

DiffusionSpec cev(double beta) {
    if (!std::isfinite(beta)) throw DomainError("CEV exponent must be finite");
    return make_ito("cev", "0", "x^" + fmt(beta), Interval::positive_half_line());
}

std::vector<CatalogEntry> catalog(double cev_beta) {
    const Interval half_closed(0.0, inf, true, false);
    std::vector<CatalogEntry> out;
    out.push_back({"bm", "standard Brownian motion on the real line", make_ito("bm", "0", "1", Interval::real_line())});
    out.push_back({"bm_absorbed", "Brownian motion on [0, inf) absorbed at 0",
                   make_ito("bm_absorbed", "0", "1", half_closed, {{Side::Left, AtomMass::infinite()}})});
    out.push_back({"bm_reflected", "Brownian motion on [0, inf) instantaneously reflected at 0",
                   make_ito("bm_reflected", "0", "1", half_closed, {{Side::Left, AtomMass::finite(0.0)}})});
    out.push_back({"bm_sticky", "Brownian motion on [0, inf) with a sticky origin (atom 0.5)",
                   make_ito("bm_sticky", "0", "1", half_closed, {{Side::Left, AtomMass::finite(0.5)}})});
    out.push_back({"bes3", "three-dimensional Bessel process, dX = dt/X + dW",
                   make_ito("bes3", "1/x", "1", Interval::positive_half_line())});
    out.push_back({"inverse_bes3", "inverse Bessel(3) process, dX = X^2 dW",
                   make_ito("inverse_bes3", "0", "x^2", Interval::positive_half_line())});
    out.push_back({"gbm", "driftless geometric Brownian motion, dX = X dW",
                   make_ito("gbm", "0", "x", Interval::positive_half_line())});
    auto c = cev(cev_beta);
    out.push_back({"cev", "constant elasticity of variance, dX = X^beta dW (beta = " + fmt(cev_beta) + ")", c});
    out.push_back({"ou", "Ornstein-Uhlenbeck process, dX = -X dt + dW", make_ito("ou", "-x", "1", Interval::real_line())});
    return out;
}

DiffusionSpec catalog_lookup(const std::string& name, double cev_beta) {
    for (auto& e : catalog(cev_beta))
        if (e.name == name) return e.spec;
    throw DomainError("unknown catalog model \"" + name + "\"");
}

}  // namespace difflab
