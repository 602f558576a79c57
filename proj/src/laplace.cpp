#include "difflab/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "difflab/classify.hpp"
#include "difflab/errors.hpp"

namespace difflab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGrowthLimit = 1e300;

using MassFn = std::function<double(double, double)>;

MassFn mass_function(const ScaleSpeedSpec& n) {
    if (n.speed_mass) return n.speed_mass;
    if (!n.speed_density) throw PreconditionError("natural-scale spec needs a speed density or a mass function");
    const RealFunction density = n.speed_density;
    return [density](double a, double b) {
        if (!(a < b)) return 0.0;
        return quad::integrate_compact(density, a, b, {1e-12, 1e-300}).value;
    };
}

RealFunction density_function(const ScaleSpeedSpec& n, const MassFn& mass) {
    if (n.speed_density) return n.speed_density;
    return [mass](double x) {
        const double h = 1e-6 * std::max(1.0, std::abs(x));
        return mass(x - h, x + h) / (2 * h);
    };
}

void require_natural(const ScaleSpeedSpec& n) {
    if (!n.natural) throw PreconditionError("spec is not on natural scale");
}

/// Nodes marched outward from y, excluding y itself.
std::vector<double> march(const RealFunction& density, double alpha, double y, double dir, const Interval& domain,
                          const GridPolicy& p, double& base) {
    const Side side = dir < 0 ? Side::Left : Side::Right;
    const double end = domain.end(side);
    const bool finite = std::isfinite(end);
    auto length = [&](double x) {
        const double rho = density(x);
        if (!(rho > 0.0)) return kInf;
        return 1.0 / std::sqrt(2.0 * alpha * rho);
    };
    double ell = length(y);
    base = std::min(ell, 1e6 * std::max(1.0, std::abs(y)));
    if (finite) base = std::min(base, std::abs(end - y));
    if (!(base > 0.0) || !std::isfinite(base)) throw PreconditionError("speed density is unusable at the anchor");

    std::vector<double> out;
    double x = y;
    double phase = 0.0;
    const double stop_gap = finite ? p.closeness * std::max(std::abs(end), std::abs(end - y)) : 0.0;
    while (static_cast<int>(out.size()) < p.max_nodes_per_side) {
        double h = std::min(p.kappa * ell, p.delta * std::max(std::abs(x - y), base));
        if (finite) {
            const double dist = std::abs(end - x);
            if (dist <= stop_gap) break;
            h = std::min(h, p.delta * dist);
        } else if (std::abs(x - y) >= p.reach * base) {
            break;
        }
        const double xn = x + dir * h;
        if (xn == x) break;
        const double elln = length(xn);
        if (std::isnan(elln)) break;
        phase += 0.5 * (h / ell + h / elln);
        out.push_back(xn);
        x = xn;
        ell = elln;
        if (phase > p.phase_cutoff) break;
    }
    return out;
}

struct SideSolution {
    std::vector<double> g;  // g[k] at outward offset k, g[0] = 1
    std::size_t certified = 0;
    int levels = 0;
    bool converged = false;
};

/// Truncation marching on one side. in[k], out[k] are the edge weights of node k
/// toward the anchor and away from it; dual[k] its dual-cell mass.
SideSolution march_truncations(const std::vector<double>& in, const std::vector<double>& out,
                               const std::vector<double>& dual, double alpha, const GridPolicy& p) {
    const std::size_t K = in.size() - 1;  // outermost offset
    SideSolution r;
    if (K < 2) return r;

    auto solve = [&](std::size_t T) {
        std::vector<double> cp(T + 1, 0.0);
        for (std::size_t k = T - 1; k >= 1; --k) {
            const double pivot = in[k] + out[k] + 2.0 * alpha * dual[k] - out[k] * cp[k + 1];
            if (!(pivot > 0.0) || !std::isfinite(pivot))
                throw SolverError("non-positive pivot in the truncated eigenproblem");
            cp[k] = in[k] / pivot;
        }
        std::vector<double> g(T + 1, 0.0);
        g[0] = 1.0;
        for (std::size_t k = 1; k < T; ++k) g[k] = cp[k] * g[k - 1];
        return g;
    };

    const std::size_t k0 = std::min(K, std::max<std::size_t>(8, K / 8));
    const std::size_t stride = static_cast<std::size_t>(std::max(1, p.stride));
    std::vector<double> prev = solve(k0);
    r.levels = 1;
    int agreements = 0;
    for (std::size_t T = k0 + stride; T < K + stride; T += stride) {
        std::vector<double> cur = solve(std::min(T, K));
        ++r.levels;
        double diff = 0.0;
        for (std::size_t k = 0; k <= k0; ++k) diff = std::max(diff, std::abs(cur[k] - prev[k]));
        agreements = diff <= p.tol ? agreements + 1 : 0;
        if (T >= K) {
            r.converged = agreements >= 2;
            std::size_t cert = 0;
            while (cert + 1 < prev.size() && std::abs(cur[cert + 1] - prev[cert + 1]) <= 10.0 * p.tol) ++cert;
            r.g = std::move(cur);
            r.certified = cert;
            return r;
        }
        prev = std::move(cur);
    }
    return r;
}

double sinh_ratio(double kappa, double a, double h) {
    const double kh = kappa * h;
    if (kh < 1e-8) return a / h;
    if (kh > 40.0) return std::exp(kappa * (a - h)) * (-std::expm1(-2.0 * kappa * a)) / (-std::expm1(-2.0 * kh));
    return std::sinh(kappa * a) / std::sinh(kh);
}

}  // namespace

std::string GridPolicy::describe() const {
    std::ostringstream os;
    os << "kappa=" << kappa << " delta=" << delta << " phase_cutoff=" << phase_cutoff << " reach=" << reach
       << " max_nodes_per_side=" << max_nodes_per_side << " doublings=" << doublings << " stride=" << stride
       << " tol=" << tol;
    return os.str();
}

GFunctionPair solve_laplace(const ScaleSpeedSpec& natural, double alpha, double y, const GridPolicy& policy) {
    require_natural(natural);
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw PreconditionError("alpha must be positive and finite");
    if (!natural.domain.in_interior(y)) throw PreconditionError("anchor must lie in the interior");
    const MassFn mass = mass_function(natural);
    const RealFunction density = density_function(natural, mass);

    GridPolicy p = policy;
    for (int attempt = 0; attempt <= policy.doublings; ++attempt) {
        double base_left = 0.0, base_right = 0.0;
        const auto left = march(density, alpha, y, -1.0, natural.domain, p, base_left);
        const auto right = march(density, alpha, y, 1.0, natural.domain, p, base_right);

        GFunctionPair pair;
        pair.alpha_ = alpha;
        pair.domain_ = natural.domain;
        pair.base_left_ = base_left;
        pair.base_right_ = base_right;
        pair.refinements_ = attempt;
        auto& x = pair.x_;
        x.assign(left.rbegin(), left.rend());
        pair.anchor_ = x.size();
        x.push_back(y);
        x.insert(x.end(), right.begin(), right.end());
        const std::size_t N = x.size();
        const std::size_t Y = pair.anchor_;

        std::vector<double> hl(N - 1), hr(N - 1);
        pair.cell_.resize(N - 1);
        for (std::size_t j = 0; j + 1 < N; ++j) {
            const double mid = 0.5 * (x[j] + x[j + 1]);
            hl[j] = mass(x[j], mid);
            hr[j] = mass(mid, x[j + 1]);
            if (!(hl[j] >= 0.0) || !(hr[j] >= 0.0) || !std::isfinite(hl[j] + hr[j]))
                throw SolverError("speed mass is not finite and non-negative near " + std::to_string(x[j]));
            pair.cell_[j] = hl[j] + hr[j];
        }
        pair.dual_.assign(N, 0.0);
        for (std::size_t i = 1; i + 1 < N; ++i) pair.dual_[i] = hr[i - 1] + hl[i];

        auto side_arrays = [&](bool leftward) {
            const std::size_t K = leftward ? Y : N - 1 - Y;
            std::vector<double> in(K + 1, 0.0), out(K + 1, 0.0), dual(K + 1, 0.0);
            for (std::size_t k = 0; k <= K; ++k) {
                const std::size_t i = leftward ? Y - k : Y + k;
                dual[k] = pair.dual_[i];
                if (k > 0) in[k] = 1.0 / std::abs(x[i] - x[leftward ? i + 1 : i - 1]);
                if (k < K) out[k] = 1.0 / std::abs(x[leftward ? i - 1 : i + 1] - x[i]);
            }
            return march_truncations(in, out, dual, alpha, p);
        };
        const SideSolution sl = side_arrays(true);
        const SideSolution sr = side_arrays(false);
        if (!sl.converged || !sr.converged) {
            p.kappa *= 0.5;
            p.delta *= 0.5;
            p.max_nodes_per_side *= 2;
            p.reach *= 1e4;
            continue;
        }
        pair.levels_ = sl.levels + sr.levels;

        const double nan = std::numeric_limits<double>::quiet_NaN();
        pair.g1_.assign(N, nan);
        pair.g2_.assign(N, nan);
        for (std::size_t k = 0; k < sl.g.size(); ++k) pair.g1_[Y - k] = sl.g[k];
        for (std::size_t k = 0; k < sr.g.size(); ++k) pair.g2_[Y + k] = sr.g[k];
        pair.g1_lo_ = Y - (sl.g.size() - 1);
        pair.g2_hi_ = Y + (sr.g.size() - 1);
        pair.cert_lo_ = Y - sl.certified;
        pair.cert_hi_ = Y + sr.certified;

        auto weight = [&](std::size_t i, std::size_t j) { return 1.0 / std::abs(x[j] - x[i]); };
        auto diag = [&](std::size_t i) { return weight(i - 1, i) + weight(i, i + 1) + 2.0 * alpha * pair.dual_[i]; };
        pair.g1_hi_ = Y;
        for (std::size_t i = Y; i + 1 < N && i >= 1; ++i) {
            const double next = (diag(i) * pair.g1_[i] - weight(i - 1, i) * pair.g1_[i - 1]) / weight(i, i + 1);
            if (!std::isfinite(next) || next > kGrowthLimit) break;
            pair.g1_[i + 1] = next;
            pair.g1_hi_ = i + 1;
        }
        pair.g2_lo_ = Y;
        for (std::size_t i = Y; i >= 1 && i + 1 < N; --i) {
            const double next = (diag(i) * pair.g2_[i] - weight(i, i + 1) * pair.g2_[i + 1]) / weight(i - 1, i);
            if (!std::isfinite(next) || next > kGrowthLimit) break;
            pair.g2_[i - 1] = next;
            pair.g2_lo_ = i - 1;
        }
        return pair;
    }
    throw NoConvergence("truncation marching did not converge after " + std::to_string(policy.doublings) +
                        " grid refinements");
}

std::vector<double> GFunctionPair::g1_right_derivative() const {
    std::vector<double> d(x_.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = g1_lo_; i < g1_hi_; ++i) d[i] = (g1_[i + 1] - g1_[i]) / (x_[i + 1] - x_[i]);
    return d;
}

std::vector<double> GFunctionPair::g2_right_derivative() const {
    std::vector<double> d(x_.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = g2_lo_; i < g2_hi_; ++i) d[i] = (g2_[i + 1] - g2_[i]) / (x_[i + 1] - x_[i]);
    return d;
}

std::pair<double, double> GFunctionPair::hull() const { return {x_[cert_lo_], x_[cert_hi_]}; }
std::pair<double, double> GFunctionPair::g1_range() const { return {x_[cert_lo_], x_[g1_hi_]}; }
std::pair<double, double> GFunctionPair::g2_range() const { return {x_[g2_lo_], x_[cert_hi_]}; }

double GFunctionPair::interpolate(const std::vector<double>& g, std::size_t lo, std::size_t hi, double x) const {
    if (!(x >= x_[lo] && x <= x_[hi]))
        throw OutOfGrid("x = " + std::to_string(x) + " is outside the certified grid [" + std::to_string(x_[lo]) +
                        ", " + std::to_string(x_[hi]) + "]");
    auto it = std::upper_bound(x_.begin() + static_cast<std::ptrdiff_t>(lo),
                               x_.begin() + static_cast<std::ptrdiff_t>(hi) + 1, x);
    std::size_t j = static_cast<std::size_t>(it - x_.begin());
    if (j > hi) return g[hi];
    --j;
    if (x == x_[j]) return g[j];
    const double h = x_[j + 1] - x_[j];
    const double kappa = std::sqrt(2.0 * alpha_ * cell_[j] / h);
    const double v = g[j] * sinh_ratio(kappa, x_[j + 1] - x, h) + g[j + 1] * sinh_ratio(kappa, x - x_[j], h);
    return std::clamp(v, std::min(g[j], g[j + 1]), std::max(g[j], g[j + 1]));
}

double GFunctionPair::g1_at(double x) const { return interpolate(g1_, cert_lo_, g1_hi_, x); }
double GFunctionPair::g2_at(double x) const { return interpolate(g2_, g2_lo_, cert_hi_, x); }

std::vector<double> GFunctionPair::wronskian() const {
    std::vector<double> w;
    for (std::size_t i = cert_lo_; i < cert_hi_; ++i)
        w.push_back((g2_[i] * g1_[i + 1] - g1_[i] * g2_[i + 1]) / (x_[i + 1] - x_[i]));
    return w;
}

double GFunctionPair::wronskian_variation() const {
    const auto w = wronskian();
    if (w.empty()) return 0.0;
    double mean = 0.0;
    for (double b : w) mean += b;
    mean /= static_cast<double>(w.size());
    double worst = 0.0;
    for (double b : w) worst = std::max(worst, std::abs(b - mean));
    return worst / std::abs(mean);
}

namespace {

/// Flux imbalance of the three-point equation at node i and the size of its terms.
std::pair<double, double> balance(const std::vector<double>& x, const std::vector<double>& g,
                                  const std::vector<double>& dual, double alpha, std::size_t i) {
    const double wo = 1.0 / (x[i + 1] - x[i]);
    const double wi = 1.0 / (x[i] - x[i - 1]);
    const double load = 2.0 * alpha * dual[i] * g[i];
    const double flux = wo * (g[i + 1] - g[i]) - wi * (g[i] - g[i - 1]);
    const double size = std::abs(g[i]) * (wo + wi) + std::abs(g[i + 1]) * wo + std::abs(g[i - 1]) * wi + std::abs(load);
    return {flux - load, size};
}

}  // namespace

double GFunctionPair::residual() const {
    double worst = 0.0;
    for (std::size_t i = cert_lo_ + 1; i < cert_hi_; ++i) {
        for (const auto* g : {&g1_, &g2_}) {
            const auto [r, size] = balance(x_, *g, dual_, alpha_, i);
            if (size > 0.0) worst = std::max(worst, std::abs(r) / size);
        }
    }
    return worst;
}

bool GFunctionPair::shape_ok() const {
    constexpr double slack = 1e-9;
    for (std::size_t i = cert_lo_; i <= cert_hi_; ++i) {
        if (!(g1_[i] >= 0.0) || !(g2_[i] > 0.0)) return false;
        if (i < cert_hi_) {
            if (g1_[i + 1] < g1_[i] * (1 - slack)) return false;
            if (g2_[i + 1] > g2_[i] * (1 + slack)) return false;
        }
    }
    for (std::size_t i = cert_lo_ + 1; i < cert_hi_; ++i) {
        for (const auto* g : {&g1_, &g2_}) {
            const auto [r, size] = balance(x_, *g, dual_, alpha_, i);
            const double flux = r + 2.0 * alpha_ * dual_[i] * (*g)[i];
            if (flux < -slack * size) return false;
        }
    }
    return true;
}

double laplace_hitting(const GFunctionPair& pair, double x) {
    const Interval& d = pair.domain();
    for (Side s : {Side::Left, Side::Right})
        if (d.closed(s) && x == d.end(s)) return 0.0;
    const double v = x <= pair.anchor() ? pair.g1_at(x) : pair.g2_at(x);
    return std::clamp(v, 0.0, 1.0);
}

const char* to_string(LimitVerdict v) noexcept {
    switch (v) {
        case LimitVerdict::Vanishes: return "vanishes";
        case LimitVerdict::Positive: return "positive";
        case LimitVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

LimitVerdict limit_verdict(const std::vector<double>& values, const std::vector<double>& ratios) noexcept {
    (void)values;
    if (ratios.size() < 3) return LimitVerdict::Inconclusive;
    const auto tail = ratios.end() - 3;
    if (std::all_of(tail, ratios.end(), [](double r) { return r < 0.5; })) return LimitVerdict::Vanishes;
    if (!std::all_of(tail, ratios.end(), [](double r) { return r > 0.9; })) return LimitVerdict::Inconclusive;
    for (auto it = tail; it + 1 != ratios.end(); ++it) {
        const double d0 = std::abs(std::log(*it)), d1 = std::abs(std::log(*(it + 1)));
        if (d1 > 1e-12 && d1 > 0.7 * d0) return LimitVerdict::Inconclusive;
    }
    return LimitVerdict::Positive;
}

LimitVerdict combine_verdicts(const std::vector<LimitVerdict>& verdicts) noexcept {
    LimitVerdict out = LimitVerdict::Inconclusive;
    for (LimitVerdict v : verdicts) {
        if (v == LimitVerdict::Inconclusive) continue;
        if (out != LimitVerdict::Inconclusive && out != v) return LimitVerdict::Inconclusive;
        out = v;
    }
    return out;
}

namespace {

constexpr double kProbeFactor = 3.0;
constexpr int kMaxProbes = 48;

void finish_profile(LimitProfile& prof, bool decreasing) {
    for (std::size_t j = 1; j < prof.values.size(); ++j) {
        const double a = prof.values[j - 1], b = prof.values[j];
        prof.ratios.push_back(a > 0.0 ? b / a : 0.0);
        if (decreasing ? b > a * (1 + 1e-9) : b < a * (1 - 1e-9)) prof.monotone = false;
    }
    prof.verdict = limit_verdict(prof.values, prof.ratios);
    if (prof.verdict == LimitVerdict::Vanishes) {
        prof.limit = 0.0;
    } else if (!prof.values.empty()) {
        prof.limit = prof.values.back();
        const std::size_t n = prof.values.size();
        if (n >= 3) {
            const double d1 = prof.values[n - 1] - prof.values[n - 2];
            const double d0 = prof.values[n - 2] - prof.values[n - 3];
            const double den = d1 - d0;
            if (den != 0.0 && std::abs(d1) < std::abs(d0)) prof.limit = prof.values[n - 1] - d1 * d1 / den;
        }
    }
}

}  // namespace

LimitProfile fd_limit_check(const GFunctionPair& pair, Side side) {
    const double y = pair.anchor();
    const double end = pair.domain().end(side);
    const auto [lo, hi] = pair.hull();
    const double dir = side == Side::Left ? -1.0 : 1.0;
    const double base = side == Side::Left ? pair.base_left() : pair.base_right();
    LimitProfile prof;
    for (double factor = kProbeFactor; factor > 1.1; factor = std::sqrt(factor)) {
        prof = LimitProfile{};
        prof.side = side;
        for (int j = 1; j <= kMaxProbes; ++j) {
            const double x = std::isfinite(end) ? end + (y - end) * std::pow(factor, -j)
                                                : y + dir * base * std::pow(kProbeFactor, -4) * std::pow(factor, j);
            if (x < lo || x > hi || x == y) break;
            const double v = laplace_hitting(pair, x);
            prof.points.push_back(x);
            prof.values.push_back(v);
            if (v < 1e-300) break;
        }
        if (prof.values.size() >= 6 || (!prof.values.empty() && prof.values.back() < 1e-300)) break;
    }
    finish_profile(prof, true);
    return prof;
}

LimitProfile mart_limit_check(const GFunctionPair& pair, Side side, std::optional<double> x0) {
    if (std::isfinite(pair.domain().end(side)))
        throw PreconditionError(std::string(side == Side::Left ? "left" : "right") + " boundary is finite on natural scale");
    LimitProfile prof;
    prof.side = side;
    const double x = x0.value_or(pair.anchor());
    const bool right = side == Side::Right;
    const double gx = right ? pair.g1_at(x) : pair.g2_at(x);
    const auto range = right ? pair.g1_range() : pair.g2_range();
    const double base = right ? pair.base_right() : pair.base_left();
    for (int j = 1; j <= kMaxProbes; ++j) {
        const double z = x + (right ? 1.0 : -1.0) * base * std::pow(kProbeFactor, j - 4);
        if (z < range.first || z > range.second) break;
        const double gz = right ? pair.g1_at(z) : pair.g2_at(z);
        const double v = std::abs(z) * gx / gz;
        prof.points.push_back(z);
        prof.values.push_back(v);
        if (v < 1e-300) break;
    }
    finish_profile(prof, false);
    prof.monotone = true;
    for (std::size_t j = 1; j < prof.values.size(); ++j) prof.monotone &= prof.ratios[j - 1] <= 1 + 1e-9 || j < 3;
    return prof;
}

bool PicardSeries::bound_holds(double rel) const {
    if (u.size() < 2) return true;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double power = 1.0;
        for (std::size_t n = 1; n < u.size(); ++n) {
            power *= u[1][i] / static_cast<double>(n);
            if (u[n][i] > power * (1 + rel) + 1e-300) return false;
        }
    }
    return true;
}

bool PicardSeries::sandwich_holds(double rel) const {
    if (u.size() < 2) return true;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = 2.0 * alpha * u[1][i];
        if (g[i] < (1 + t) * (1 - rel) || g[i] > std::exp(t) * (1 + rel)) return false;
    }
    return true;
}

PicardSeries picard_series(const ScaleSpeedSpec& natural, double alpha, Side side, int n_max, double start,
                           const PicardOptions& options) {
    require_natural(natural);
    if (!(alpha > 0.0)) throw PreconditionError("alpha must be positive");
    if (n_max < 1) throw PreconditionError("need at least one Picard term");
    if (!natural.domain.in_interior(start)) throw PreconditionError("start must lie in the interior");

    const DiffusionSpec as_spec{natural, std::string("natural scale")};
    const BoundaryClass bc = classify_boundary(as_spec, side, ClassifyOptions{});
    if (bc.kind == Kind::Natural) throw HypothesisError("boundary is natural; the Picard series needs a non-natural end");
    if (bc.kind == Kind::Inconclusive) throw HypothesisError("boundary class could not be decided");

    const MassFn mass = mass_function(natural);
    const RealFunction density = density_function(natural, mass);
    const double end = natural.domain.end(side);
    const double dir = side == Side::Right ? 1.0 : -1.0;
    const bool finite = std::isfinite(end);
    const double L = finite ? std::abs(end - start) : std::max(std::abs(start), 1.0);

    PicardSeries r;
    r.side = side;
    r.alpha = alpha;
    std::vector<double> z{start};
    const double stop_gap = finite ? options.closeness * std::max(std::abs(end), L) : 0.0;
    for (;;) {
        const double xc = z.back();
        double h;
        if (finite) {
            const double dist = std::abs(end - xc);
            if (dist <= stop_gap) break;
            h = options.delta * dist;
        } else {
            if (std::abs(xc - start) >= options.reach * L) break;
            h = options.delta * std::max(std::abs(xc - start), L);
        }
        const double xn = xc + dir * h;
        if (xn == xc) break;
        z.push_back(xn);
    }
    const std::size_t K = z.size() - 1;
    std::vector<double> cell(K);
    for (std::size_t j = 0; j < K; ++j) cell[j] = mass(std::min(z[j], z[j + 1]), std::max(z[j], z[j + 1]));

    const double zK = z[K];
    const quad::Tolerance tol{1e-10, 1e-300};
    const auto tail = quad::integrate_improper(density, zK, end, tol);
    const auto first = quad::integrate_improper([&](double t) { return std::abs(t - zK) * density(t); }, zK, end, tol);
    if (tail.diverges() || first.diverges() || !std::isfinite(tail.value) || !std::isfinite(first.value))
        throw DivergentTail("first Picard iterate is infinite: the tail mass weighted by distance diverges");

    r.x = z;
    r.u.push_back(std::vector<double>(K + 1, 1.0));
    std::vector<double> B(K + 1);
    for (int n = 1; n <= n_max; ++n) {
        const auto& prev = r.u.back();
        B[K] = prev[K] * tail.value;
        for (std::size_t j = K; j-- > 0;) B[j] = B[j + 1] + cell[j] * 0.5 * (prev[j] + prev[j + 1]);
        std::vector<double> un(K + 1);
        un[K] = prev[K] * first.value / static_cast<double>(n);
        for (std::size_t j = K; j-- > 0;) un[j] = un[j + 1] + 0.5 * (B[j] + B[j + 1]) * std::abs(z[j + 1] - z[j]);
        if (!std::isfinite(un[0])) throw DivergentTail("Picard iterate " + std::to_string(n) + " is infinite");
        r.u.push_back(std::move(un));
    }
    r.g.assign(K + 1, 0.0);
    for (std::size_t i = 0; i <= K; ++i) {
        double w = 1.0;
        for (std::size_t n = 0; n < r.u.size(); ++n) {
            r.g[i] += w * r.u[n][i];
            w *= 2.0 * alpha;
        }
    }
    return r;
}

double picard_spread(const PicardSeries& picard, const GFunctionPair& pair) {
    const bool right = picard.side == Side::Right;
    const auto range = right ? pair.g2_range() : pair.g1_range();
    double lo = kInf, hi = 0.0;
    for (std::size_t i = 0; i < picard.x.size(); ++i) {
        const double z = picard.x[i];
        if (z < range.first || z > range.second) continue;
        const double g = right ? pair.g2_at(z) : pair.g1_at(z);
        const double ratio = picard.g[i] / g;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    if (hi == 0.0) throw OutOfGrid("Picard grid does not overlap the solver's certified range");
    return hi / lo - 1.0;
}

LaplaceSolver::LaplaceSolver(const DiffusionSpec& spec, const GridPolicy& policy, std::optional<double> c)
    : ss_(build_scale_speed(spec, c)),
      natural_(to_natural_scale(spec, ss_.scale.reference_point())),
      identity_(is_natural_scale(spec)),
      policy_(policy) {}

double LaplaceSolver::to_natural(double x) const {
    if (identity_) return x;
    const Interval& d = ss_.scale.domain();
    if (x == d.left()) return ss_.scale.end_value(Side::Left);
    if (x == d.right()) return ss_.scale.end_value(Side::Right);
    if (!d.in_interior(x)) throw DomainError("x = " + std::to_string(x) + " is outside " + d.to_string());
    return ss_.scale(x);
}

GFunctionPair LaplaceSolver::solve(double alpha, double y) const {
    return solve_laplace(natural_, alpha, to_natural(y), policy_);
}

double LaplaceSolver::transform(double alpha, double x, double y) const {
    if (x == y) return 1.0;
    return laplace_hitting(solve(alpha, y), to_natural(x));
}

}  // namespace difflab
