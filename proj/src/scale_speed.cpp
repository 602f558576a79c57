#include "difflab/scale_speed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// Kronrod abscissae on [-1, 1] in ascending order and matching weights.
constexpr std::array<double, 21> kx = {
    -0.995657163025808080735527280689003, -0.973906528517171720077964012084452,
    -0.930157491355708226001207180059508, -0.865063366688984510732096688423493,
    -0.780817726586416897063717578345042, -0.679409568299024406234327365114874,
    -0.562757134668604683339000099272694, -0.433395394129247190799265943165784,
    -0.294392862701460198131126603103866, -0.148874338981631210884826001129720,
    0.0,
    0.148874338981631210884826001129720,  0.294392862701460198131126603103866,
    0.433395394129247190799265943165784,  0.562757134668604683339000099272694,
    0.679409568299024406234327365114874,  0.780817726586416897063717578345042,
    0.865063366688984510732096688423493,  0.930157491355708226001207180059508,
    0.973906528517171720077964012084452,  0.995657163025808080735527280689003};

constexpr std::array<double, 21> kw = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600801478532, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
    0.147739104901338491374841515972068, 0.142775938577060080797094273138717,
    0.134709217311473325928054001771707, 0.123491976262065851077600801478532,
    0.109387158802297641899210590325805, 0.093125454583697605535065465083366,
    0.075039674810919952767043140916190, 0.054755896574351996031381300244580,
    0.032558162307964727478818972459390, 0.011694638867371874278064396062192};

constexpr std::array<double, 7> gx = {-0.949107912342758524526189684047851, -0.741531185599394439863864773280788,
                                      -0.405845151377397166906606412076961, 0.0,
                                      0.405845151377397166906606412076961,  0.741531185599394439863864773280788,
                                      0.949107912342758524526189684047851};
constexpr std::array<double, 7> gw = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                      0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
                                      0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
                                      0.129484966168869693270611432679082};

template <typename F>
double gauss7(const F& f, double a, double b) {
    const double m = 0.5 * (a + b), h = 0.5 * (b - a);
    double sum = 0.0;
    for (int k = 0; k < 7; ++k) sum += gw[k] * f(m + h * gx[k]);
    return sum * h;
}

}  // namespace

namespace detail {

class ScaleSpeedImpl {
public:
    ScaleSpeedImpl(Interval d, double c) : domain(d), c0(c) {}
    virtual ~ScaleSpeedImpl() = default;

    virtual double s(double x) const = 0;
    virtual double phi(double x) const = 0;
    virtual double gap(double x) const = 0;
    virtual double inverse(double y) const = 0;
    virtual double density(double x) const = 0;
    virtual double mass(double a, double b) const = 0;
    virtual double density_times_derivative(double x) const = 0;
    virtual bool identity() const { return false; }
    virtual int grid_size() const { return 0; }

    Interval domain;
    double c0;
    std::array<quad::Verdict, 2> limits;  // raw integrals of s' from c0 to each end

    double clamp(double x) const { return std::min(std::max(x, domain.left()), domain.right()); }

    void compute_limits() {
        const quad::Tolerance tol{1e-10, 1e-14};
        for (Side side : {Side::Left, Side::Right}) {
            const double end = domain.end(side);
            try {
                limits[side == Side::Left ? 0 : 1] =
                    quad::integrate_improper([this](double x) { return std::exp(phi(x)); }, c0, end, tol);
            } catch (const Error& e) {
                quad::Verdict v;
                v.reason = e.what();
                limits[side == Side::Left ? 0 : 1] = v;
            }
        }
    }

    /// Bracketing inverse used where no grid is available.
    double bracket_inverse(double y) const {
        auto outward = [&](double from, Side side, double k) {
            const double end = domain.end(side);
            const double dir = side == Side::Right ? 1.0 : -1.0;
            if (std::isinf(end)) return from + dir * std::max(1.0, std::fabs(from - c0)) * k;
            return end - (end - from) / (1.0 + k);
        };
        double lo = c0, hi = c0;
        const double s0 = s(c0);
        if (y == s0) return c0;
        const Side side = y > s0 ? Side::Right : Side::Left;
        double probe = c0;
        for (int i = 0; i < 2000; ++i) {
            const double next = outward(probe, side, 1.0);
            if (next == probe) break;
            probe = next;
            const double v = s(probe);
            if (std::isnan(v)) break;
            if ((side == Side::Right && v >= y) || (side == Side::Left && v <= y)) {
                if (side == Side::Right)
                    hi = probe;
                else
                    lo = probe;
                for (int it = 0; it < 300; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mid <= lo || mid >= hi) break;
                    if (s(mid) < y)
                        lo = mid;
                    else
                        hi = mid;
                }
                return 0.5 * (lo + hi);
            }
            if (side == Side::Right)
                lo = probe;
            else
                hi = probe;
        }
        throw InversionError("no bracket for scale value " + std::to_string(y));
    }
};

struct Frame {
    std::shared_ptr<const ScaleSpeedImpl> impl;
    double c = 0.0;
    double shift = 0.0;
    double log_factor = 0.0;
    Interval domain;
    std::vector<SpeedAtom> atoms;
    std::array<quad::Verdict, 2> limits;
};

namespace {

class ItoImpl final : public ScaleSpeedImpl {
public:
    ItoImpl(const CoefficientSpec& spec, double c, const ScaleOptions& opt)
        : ScaleSpeedImpl(spec.domain, c), spec_(spec), opt_(opt), zero_drift_(spec.drift.is_zero()) {
        if (!spec.domain.in_interior(c)) throw PreconditionError("reference point outside the interior");
        build();
        if (zero_drift_) {
            for (Side side : {Side::Left, Side::Right}) {
                const double end = domain.end(side);
                quad::Verdict v;
                v.outcome = std::isinf(end) ? quad::Verdict::Outcome::Diverges : quad::Verdict::Outcome::Finite;
                v.value = std::isinf(end) ? inf : std::fabs(end - c0);
                v.reason = "identity scale";
                limits[side == Side::Left ? 0 : 1] = v;
            }
        } else {
            compute_limits();
        }
    }

    int grid_size() const override { return static_cast<int>(x_.size()); }

    double s(double x) const override {
        if (zero_drift_) return x - c0;
        const auto i = cell(x);
        if (i < 0) return s_beyond(x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const bool steep = std::fabs(psi_[i]) * h > 0.02 || std::fabs(psi_[i + 1]) * h > 0.02;
        if (!steep && std::isfinite(s_[i]) && std::isfinite(s_[i + 1])) {
            const double d0 = std::exp(phi_[i]), d1 = std::exp(phi_[i + 1]);
            if (std::isfinite(d0) && std::isfinite(d1)) {
                const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
                const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
                const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
                const double h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
                const double h3 = 0.5 * t3 - t4 + 0.5 * t5;
                const double h4 = -4 * t3 + 7 * t4 - 3 * t5;
                const double h5 = 10 * t3 - 15 * t4 + 6 * t5;
                return h0 * s_[i] + h1 * h * d0 + h2 * h * h * d0 * psi_[i] + h3 * h * h * d1 * psi_[i + 1] +
                       h4 * h * d1 + h5 * s_[i + 1];
            }
        }
        return gap(x) * std::exp(phi(x));
    }

    double phi(double x) const override {
        if (zero_drift_) return 0.0;
        const auto i = cell(x);
        if (i < 0) return phi_beyond(x);
        return hermite3(i, x, phi_, psi_);
    }

    double gap(double x) const override {
        if (zero_drift_) return x - c0;
        const auto i = cell(x);
        if (i < 0) return gap_beyond(x);
        std::array<double, 2> dg{1.0 - psi_[i] * g_[i], 1.0 - psi_[i + 1] * g_[i + 1]};
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * g_[i] + (t3 - 2 * t2 + t) * h * dg[0] + (-2 * t3 + 3 * t2) * g_[i + 1] +
               (t3 - t2) * h * dg[1];
    }

    double density(double x) const override {
        const double sg = spec_.diffusion(x);
        return std::exp(-phi(x)) / (sg * sg);
    }

    double density_times_derivative(double x) const override {
        const double sg = spec_.diffusion(x);
        return 1.0 / (sg * sg);
    }

    double inverse(double y) const override {
        if (zero_drift_) {
            const double x = y + c0;
            if (!(x >= domain.left() && x <= domain.right())) throw InversionError("scale value outside the range");
            return x;
        }
        const std::size_t n = x_.size();
        if (!(y >= s_.front() && y <= s_.back()) || !std::isfinite(y)) {
            const auto& lim = limits[y < s_.front() ? 0 : 1];
            if (lim.finite()) {
                const double end = y < s_.front() ? -lim.value : lim.value;
                if ((y < s_.front() && y <= end) || (y > s_.back() && y >= end))
                    return y == end ? domain.end(y < s_.front() ? Side::Left : Side::Right)
                                    : throw InversionError("scale value outside the range");
            }
            if (std::isnan(y)) throw InversionError("scale value is NaN");
            return bracket_inverse(y);
        }
        std::size_t i = static_cast<std::size_t>(std::upper_bound(s_.begin(), s_.end(), y) - s_.begin());
        if (i == 0) i = 1;
        if (i >= n) i = n - 1;
        double lo = x_[i - 1], hi = x_[i];
        if (y == s_[i - 1]) return lo;
        if (y == s_[i]) return hi;
        double x = lo + (hi - lo) * (y - s_[i - 1]) / (s_[i] - s_[i - 1]);
        if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
        for (int it = 0; it < 100; ++it) {
            const double f = s(x) - y;
            if (f == 0.0) return x;
            if (f < 0)
                lo = x;
            else
                hi = x;
            const double step = f / std::exp(phi(x));
            double next = x - step;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (next == x || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::fabs(x)) return next;
            x = next;
        }
        return x;
    }

    double mass(double a, double b) const override {
        a = clamp(a);
        b = clamp(b);
        if (!(a < b)) return 0.0;
        double total = 0.0;
        const double lo = x_.front(), hi = x_.back();
        if (a < lo) {
            total += beyond_mass(a, std::min(b, lo));
            a = lo;
            if (!(a < b)) return total;
        }
        if (b > hi) {
            total += beyond_mass(std::max(a, hi), b);
            b = hi;
            if (!(a < b)) return total;
        }
        const std::size_t ia = locate(a);
        const std::size_t ib = locate(b);
        if (ia == ib) return total + partial(ia, a, b);
        total += partial(ia, a, x_[ia + 1]);
        if (b > x_[ib]) total += partial(ib, x_[ib], b);
        return total + full(ia + 1, ib);
    }

private:
    double psi_at(double x) const {
        const double sg = spec_.diffusion(x);
        return -2.0 * spec_.drift(x) / (sg * sg);
    }

    double sigma2(double x) const {
        const double sg = spec_.diffusion(x);
        return sg * sg;
    }

    double width() const {
        double w = 1.0;
        if (domain.finite(Side::Left)) w = std::min(w, c0 - domain.left());
        if (domain.finite(Side::Right)) w = std::min(w, domain.right() - c0);
        return w;
    }

    struct Node {
        double x, phi, psi, s, g;
    };

    bool make_cell(const Node& a, double xb, Node& b, double& m) const {
        const double lo = std::min(a.x, xb), hi = std::max(a.x, xb);
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        const double dir = xb > a.x ? 1.0 : -1.0;
        std::array<double, 21> t{}, ph{};
        for (int j = 0; j < 21; ++j) t[j] = mid + half * kx[j];
        auto psi = [this](double z) { return psi_at(z); };
        if (zero_drift_) {
            ph.fill(0.0);
            b = {xb, 0.0, 0.0, xb - c0, xb - c0};
        } else {
            double prev = a.x, acc = a.phi;
            for (int k = 0; k < 21; ++k) {
                const int j = dir > 0 ? k : 20 - k;
                acc += gauss7(psi, prev, t[j]);
                ph[j] = acc;
                prev = t[j];
            }
            acc += gauss7(psi, prev, xb);
            b.x = xb;
            b.phi = acc;
            b.psi = psi_at(xb);
            if (!std::isfinite(b.phi) || !std::isfinite(b.psi)) return false;
            double ds = 0.0, dg = 0.0;
            for (int j = 0; j < 21; ++j) {
                ds += kw[j] * std::exp(ph[j]);
                dg += kw[j] * std::exp(ph[j] - b.phi);
            }
            b.s = a.s + dir * ds * half;
            b.g = a.g * std::exp(a.phi - b.phi) + dir * dg * half;
            if (!std::isfinite(b.g)) return false;
        }
        double mm = 0.0;
        for (int j = 0; j < 21; ++j) mm += kw[j] * std::exp(-ph[j]) / sigma2(t[j]);
        m = mm * half;
        return std::isfinite(m) && m >= 0.0;
    }

    void march(double dir, std::vector<Node>& nodes, std::vector<double>& masses) const {
        const Side side = dir > 0 ? Side::Right : Side::Left;
        const double end = domain.end(side);
        const bool finite_end = std::isfinite(end);
        const double w = width();
        Node cur = nodes.back();
        while (static_cast<int>(nodes.size()) <= opt_.max_nodes_per_side) {
            const double dist_c = std::fabs(cur.x - c0);
            double h = opt_.step * std::max(w, dist_c);
            if (finite_end) {
                const double dist_end = std::fabs(end - cur.x);
                if (dist_end <= opt_.closeness * std::max(std::fabs(end), std::fabs(c0 - end))) break;
                h = std::min(h, opt_.step * dist_end);
            } else if (dist_c >= opt_.reach * w) {
                break;
            }
            Node next{};
            double m = 0.0;
            bool ok = false;
            for (int tries = 0; tries < 30; ++tries, h *= 0.5) {
                const double xb = cur.x + dir * h;
                if (xb == cur.x) break;
                bool built = false;
                try {
                    built = make_cell(cur, xb, next, m);
                } catch (const Error&) {
                    built = false;
                }
                if (!built) continue;
                if (!zero_drift_ && std::fabs(next.phi - cur.phi) > 0.5) continue;
                ok = true;
                break;
            }
            if (!ok) break;
            nodes.push_back(next);
            masses.push_back(m);
            cur = next;
        }
    }

    void build() {
        const Node start{c0, 0.0, zero_drift_ ? 0.0 : psi_at(c0), 0.0, 0.0};
        std::vector<Node> right{start}, left{start};
        std::vector<double> mr, ml;
        march(1.0, right, mr);
        march(-1.0, left, ml);
        const std::size_t n = left.size() + right.size() - 1;
        x_.reserve(n);
        for (std::size_t k = left.size(); k-- > 0;) push(left[k]);
        for (std::size_t k = 1; k < right.size(); ++k) push(right[k]);
        ic_ = left.size() - 1;
        cell_.assign(ml.rbegin(), ml.rend());
        cell_.insert(cell_.end(), mr.begin(), mr.end());

        const std::size_t cells = cell_.size();
        L_.assign(n, 0.0);
        R_.assign(n, 0.0);
        C_.assign(n, 0.0);
        for (std::size_t i = 0; i < cells; ++i) L_[i + 1] = L_[i] + cell_[i];
        for (std::size_t i = cells; i-- > 0;) R_[i] = R_[i + 1] + cell_[i];
        for (std::size_t i = ic_; i < cells; ++i) C_[i + 1] = C_[i] + cell_[i];
        for (std::size_t i = ic_; i-- > 0;) C_[i] = C_[i + 1] + cell_[i];
    }

    void push(const Node& nd) {
        x_.push_back(nd.x);
        phi_.push_back(nd.phi);
        psi_.push_back(nd.psi);
        s_.push_back(nd.s);
        g_.push_back(nd.g);
    }

    long cell(double x) const {
        if (!(x >= x_.front() && x <= x_.back())) return -1;
        return static_cast<long>(locate(x));
    }

    std::size_t locate(double x) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - x_.begin());
        if (i == 0) return 0;
        i -= 1;
        return std::min(i, x_.size() - 2);
    }

    double hermite3(std::size_t i, double x, const std::vector<double>& f, const std::vector<double>& df) const {
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * f[i] + (t3 - 2 * t2 + t) * h * df[i] + (-2 * t3 + 3 * t2) * f[i + 1] +
               (t3 - t2) * h * df[i + 1];
    }

    double partial(std::size_t i, double a, double b) const {
        if (!(a < b)) return 0.0;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double sum = 0.0;
        for (int j = 0; j < 21; ++j) {
            const double z = mid + half * kx[j];
            const double p = zero_drift_ ? 0.0 : hermite3(i, z, phi_, psi_);
            sum += kw[j] * std::exp(-p) / sigma2(z);
        }
        return sum * half;
    }

    double full(std::size_t j, std::size_t k) const {
        if (k <= j) return 0.0;
        if (k - j <= 64) {
            double sum = 0.0;
            for (std::size_t i = j; i < k; ++i) sum += cell_[i];
            return sum;
        }
        double best = L_[k] - L_[j];
        double scale = L_[k];
        if (R_[j] < scale) {
            scale = R_[j];
            best = R_[j] - R_[k];
        }
        if (j >= ic_) {
            if (C_[k] < scale) best = C_[k] - C_[j];
        } else if (k <= ic_) {
            if (C_[j] < scale) best = C_[j] - C_[k];
        } else {
            best = C_[j] + C_[k];
        }
        return std::max(best, 0.0);
    }

    // Beyond the grid: direct quadrature.
    double phi_beyond(double x) const {
        const bool right = x > x_.back();
        const std::size_t e = right ? x_.size() - 1 : 0;
        try {
            const quad::Tolerance tol{1e-13, 1e-15};
            const auto psi = [this](double z) { return psi_at(z); };
            if (right) return phi_[e] + quad::integrate_compact(psi, x_[e], x, tol).value;
            return phi_[e] - quad::integrate_compact(psi, x, x_[e], tol).value;
        } catch (const Error&) {
            return nan;
        }
    }

    double s_beyond(double x) const {
        const bool right = x > x_.back();
        const std::size_t e = right ? x_.size() - 1 : 0;
        try {
            const quad::Tolerance tol{1e-12, 1e-300};
            const auto ds = [this](double z) { return std::exp(phi_beyond(z)); };
            if (right) return s_[e] + quad::integrate_compact(ds, x_[e], x, tol).value;
            return s_[e] - quad::integrate_compact(ds, x, x_[e], tol).value;
        } catch (const Error&) {
            return nan;
        }
    }

    // Walks back from x toward the grid in panels, accumulating the integral
    // of exp(phi(z) - phi(x)). Panels are laid out in the offset u = z - x.
    double gap_beyond(double x) const {
        const bool right = x > x_.back();
        const std::size_t e = right ? x_.size() - 1 : 0;
        const double sign = right ? 1.0 : -1.0;
        const double stop = x_[e] - x;
        const auto psi = [this, x](double u) { return psi_at(x + u); };
        const double ps = std::fabs(psi_at(x));
        double h = std::fabs(stop);
        if (ps > 0.0 && std::isfinite(ps)) h = std::min(h, 1.0 / ps);
        double u_hi = 0.0, d_hi = 0.0, total = 0.0;
        for (int panel = 0; panel < 400; ++panel) {
            double u_lo = u_hi - sign * h;
            if (sign * (u_lo - stop) <= 0.0) u_lo = stop;
            const double lo = std::min(u_lo, u_hi), hi = std::max(u_lo, u_hi);
            const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            std::array<double, 21> t{}, d{};
            for (int j = 0; j < 21; ++j) t[j] = mid + half * kx[j];
            double prev = u_hi, acc = d_hi;
            for (int k = 0; k < 21; ++k) {
                const int j = right ? 20 - k : k;
                acc += gauss7(psi, prev, t[j]);
                d[j] = acc;
                prev = t[j];
            }
            acc += gauss7(psi, prev, u_lo);
            double piece = 0.0;
            for (int j = 0; j < 21; ++j) piece += kw[j] * std::exp(d[j]);
            piece *= half;
            total += piece;
            const double drop = d_hi - acc;
            u_hi = u_lo;
            d_hi = acc;
            if (u_lo == stop) return sign * total + g_[e] * std::exp(d_hi);
            if (d_hi < -60.0 && piece <= 1e-17 * total) return sign * total;
            if (!std::isfinite(total)) return nan;
            if (drop < 2.0) h *= 2.0;
        }
        return nan;
    }

    double beyond_mass(double a, double b) const {
        if (!(a < b)) return 0.0;
        const auto dens = [this](double z) { return density(z); };
        const bool at_end = a <= domain.left() || b >= domain.right();
        try {
            if (at_end) {
                if (std::isfinite(a) && std::isfinite(b)) {
                    try {
                        return quad::integrate_compact(dens, a, b, quad::Tolerance{1e-11, 1e-300}).value;
                    } catch (const QuadratureError&) {
                    }
                }
                const double from = a <= domain.left() ? b : a;
                const double to = a <= domain.left() ? domain.left() : domain.right();
                const auto v = quad::integrate_improper(dens, from, to, quad::Tolerance{1e-10, 1e-300});
                if (v.finite()) return v.value;
                return v.diverges() ? inf : nan;
            }
            return quad::integrate_compact(dens, a, b, quad::Tolerance{1e-11, 1e-300}).value;
        } catch (const Error&) {
            return nan;
        }
    }

    CoefficientSpec spec_;
    ScaleOptions opt_;
    bool zero_drift_;
    std::vector<double> x_, phi_, psi_, s_, g_, cell_, L_, R_, C_;
    std::size_t ic_ = 0;
};

class DirectImpl final : public ScaleSpeedImpl {
public:
    DirectImpl(const ScaleSpeedSpec& spec, double c) : ScaleSpeedImpl(spec.domain, c), spec_(spec) {
        if (!spec.domain.in_interior(c)) throw PreconditionError("reference point outside the interior");
        if (!spec_.natural && !spec_.scale) throw PreconditionError("scale function missing");
        if (!spec_.speed_density && !spec_.speed_mass) throw PreconditionError("speed density missing");
        s_c0_ = spec_.natural ? c0 : spec_.scale(c0);
        if (spec_.natural) {
            for (Side side : {Side::Left, Side::Right}) {
                const double end = domain.end(side);
                quad::Verdict v;
                v.outcome = std::isinf(end) ? quad::Verdict::Outcome::Diverges : quad::Verdict::Outcome::Finite;
                v.value = std::isinf(end) ? inf : std::fabs(end - c0);
                v.reason = "identity scale";
                limits[side == Side::Left ? 0 : 1] = v;
            }
        } else {
            compute_limits();
        }
    }

    bool identity() const override { return spec_.natural; }

    double s(double x) const override { return spec_.natural ? x - c0 : spec_.scale(x) - s_c0_; }

    double derivative(double x) const {
        if (spec_.natural) return 1.0;
        if (spec_.scale_derivative) return spec_.scale_derivative(x);
        double h = 1e-4 * std::max(1.0, std::fabs(x));
        for (Side side : {Side::Left, Side::Right})
            if (domain.finite(side)) h = std::min(h, 0.25 * std::fabs(x - domain.end(side)));
        return (-spec_.scale(x + 2 * h) + 8 * spec_.scale(x + h) - 8 * spec_.scale(x - h) + spec_.scale(x - 2 * h)) /
               (12 * h);
    }

    double phi(double x) const override { return std::log(derivative(x)); }
    double gap(double x) const override { return s(x) / derivative(x); }

    double inverse(double y) const override {
        if (spec_.natural) {
            const double x = y + c0;
            if (!(x >= domain.left() && x <= domain.right())) throw InversionError("scale value outside the range");
            return x;
        }
        return bracket_inverse(y);
    }

    double density(double x) const override {
        if (spec_.speed_density) return spec_.speed_density(x);
        const double h = 1e-6 * std::max(1.0, std::fabs(x));
        return spec_.speed_mass(x - h, x + h) / (2 * h);
    }

    double density_times_derivative(double x) const override { return density(x) * derivative(x); }

    double mass(double a, double b) const override {
        a = clamp(a);
        b = clamp(b);
        if (!(a < b)) return 0.0;
        if (spec_.speed_mass) return spec_.speed_mass(a, b);
        const auto dens = [this](double z) { return density(z); };
        try {
            if (a <= domain.left() || b >= domain.right()) {
                const bool left = a <= domain.left();
                if (left && b >= domain.right()) {
                    const double mid = std::isfinite(a) && std::isfinite(b) ? 0.5 * (a + b) : c0;
                    return mass(a, mid) + mass(mid, b);
                }
                const auto v = quad::integrate_improper(dens, left ? b : a, left ? a : b, quad::Tolerance{1e-10, 1e-300});
                if (v.finite()) return v.value;
                return v.diverges() ? inf : nan;
            }
            return quad::integrate_compact(dens, a, b, quad::Tolerance{1e-11, 1e-300}).value;
        } catch (const Error&) {
            return nan;
        }
    }

private:
    ScaleSpeedSpec spec_;
    double s_c0_ = 0.0;
};

quad::Verdict transform_limit(const quad::Verdict& raw, Side side, double shift, double log_factor) {
    quad::Verdict v = raw;
    const double f = std::exp(log_factor);
    const double off = side == Side::Right ? -shift : shift;
    v.value = (raw.value + off) * f;
    v.error = raw.error * f;
    for (auto& p : v.partial_sums) p *= f;
    return v;
}

std::shared_ptr<const Frame> make_frame(std::shared_ptr<const ScaleSpeedImpl> impl, double c,
                                        std::vector<SpeedAtom> atoms) {
    if (!impl->domain.in_interior(c)) throw PreconditionError("reference point outside the interior");
    auto f = std::make_shared<Frame>(Frame{impl, c, 0.0, 0.0, impl->domain, std::move(atoms), {}});
    if (c != impl->c0) {
        f->shift = impl->s(c);
        f->log_factor = -impl->phi(c);
    }
    for (Side side : {Side::Left, Side::Right}) {
        const int k = side == Side::Left ? 0 : 1;
        f->limits[k] = transform_limit(impl->limits[k], side, f->shift, f->log_factor);
    }
    return f;
}

std::pair<double, double> central_window(const Interval& d) {
    const double l = d.left(), r = d.right();
    if (std::isfinite(l) && std::isfinite(r)) return {l + 0.25 * (r - l), r - 0.25 * (r - l)};
    if (std::isfinite(l)) return {l + 1.0, l + 2.0};
    if (std::isfinite(r)) return {r - 2.0, r - 1.0};
    return {-1.0, 1.0};
}

std::shared_ptr<const ScaleSpeedImpl> make_impl(const DiffusionSpec& spec, double c0, const ScaleOptions& opt) {
    if (const auto* ito = std::get_if<ItoDiffusion>(&spec.data))
        return std::make_shared<ItoImpl>(ito->coefficients, c0, opt);
    return std::make_shared<DirectImpl>(std::get<ScaleSpeedSpec>(spec.data), c0);
}

double default_point(const ScaleSpeedImpl& impl) {
    const auto [a, b] = central_window(impl.domain);
    return impl.inverse(0.5 * (impl.s(a) + impl.s(b)));
}

}  // namespace
}  // namespace detail

using detail::Frame;

double ScaleFunction::operator()(double x) const {
    return (frame_->impl->s(x) - frame_->shift) * std::exp(frame_->log_factor);
}

double ScaleFunction::increment(double x, double y) const {
    return (frame_->impl->s(y) - frame_->impl->s(x)) * std::exp(frame_->log_factor);
}

double ScaleFunction::derivative(double x) const { return std::exp(log_derivative(x)); }

double ScaleFunction::log_derivative(double x) const { return frame_->impl->phi(x) + frame_->log_factor; }

double ScaleFunction::gap_ratio(double x) const {
    const double g = frame_->impl->gap(x);
    if (frame_->shift == 0.0) return g;
    return g - frame_->shift * std::exp(-frame_->impl->phi(x));
}

double ScaleFunction::inverse(double y) const {
    return frame_->impl->inverse(y * std::exp(-frame_->log_factor) + frame_->shift);
}

const quad::Verdict& ScaleFunction::limit(Side side) const { return frame_->limits[side == Side::Left ? 0 : 1]; }

double ScaleFunction::end_value(Side side) const {
    const auto& v = limit(side);
    const double sign = side == Side::Left ? -1.0 : 1.0;
    if (v.finite()) return sign * v.value;
    if (v.diverges()) return sign * inf;
    return nan;
}

double ScaleFunction::reference_point() const noexcept { return frame_->c; }
const Interval& ScaleFunction::domain() const noexcept { return frame_->domain; }
bool ScaleFunction::is_identity() const noexcept { return frame_->impl->identity() && frame_->log_factor == 0.0; }
int ScaleFunction::grid_size() const noexcept { return frame_->impl->grid_size(); }

double SpeedMeasure::density(double x) const { return frame_->impl->density(x) * std::exp(-frame_->log_factor); }

double SpeedMeasure::interior_mass(double a, double b) const {
    return frame_->impl->mass(a, b) * std::exp(-frame_->log_factor);
}

double SpeedMeasure::measure_of(double a, double b) const {
    const Interval& d = frame_->domain;
    if (std::isnan(a) || std::isnan(b) || a > b) throw DomainError("measure_of needs a <= b");
    if (a < d.left() || b > d.right()) throw DomainError("measure_of interval leaves the state space");
    double m = a < b ? interior_mass(a, b) : 0.0;
    if (b == d.right() && d.right_closed())
        if (auto atom = atom_on(frame_->atoms, Side::Right)) m += atom->value();
    return m;
}

std::optional<AtomMass> SpeedMeasure::atom(Side side) const { return atom_on(frame_->atoms, side); }

double SpeedMeasure::density_times_derivative(double x) const { return frame_->impl->density_times_derivative(x); }

const Interval& SpeedMeasure::domain() const noexcept { return frame_->domain; }

ScaleSpeed::ScaleSpeed(std::shared_ptr<const Frame> frame) : scale(frame), speed(frame) {}

ScaleSpeed ScaleSpeed::rebased(double c) const {
    return ScaleSpeed(detail::make_frame(scale.frame_->impl, c, scale.frame_->atoms));
}

ScaleFunction build_scale(const CoefficientSpec& spec, double c, const ScaleOptions& options) {
    auto impl = std::make_shared<detail::ItoImpl>(spec, c, options);
    return ScaleFunction(detail::make_frame(impl, c, {}));
}

SpeedMeasure build_speed(const CoefficientSpec& spec, const ScaleFunction& scale, const std::vector<SpeedAtom>& atoms) {
    if (!(spec.domain == scale.domain())) throw PreconditionError("scale was built for a different domain");
    auto f = std::make_shared<Frame>(*scale.frame_);
    f->atoms = atoms;
    return SpeedMeasure(f);
}

ScaleSpeed build_scale_speed(const DiffusionSpec& spec, std::optional<double> c, const ScaleOptions& options) {
    if (c) return ScaleSpeed(detail::make_frame(detail::make_impl(spec, *c, options), *c, spec.atoms()));
    const auto [a, b] = detail::central_window(spec.domain());
    auto impl = detail::make_impl(spec, 0.5 * (a + b), options);
    const double point = detail::default_point(*impl);
    return ScaleSpeed(detail::make_frame(impl, point, spec.atoms()));
}

double default_reference_point(const DiffusionSpec& spec, const ScaleOptions& options) {
    return build_scale_speed(spec, std::nullopt, options).scale.reference_point();
}

bool is_natural_scale(const DiffusionSpec& spec) noexcept {
    if (const auto* ito = std::get_if<ItoDiffusion>(&spec.data)) return ito->coefficients.drift.is_zero();
    return std::get<ScaleSpeedSpec>(spec.data).natural;
}

ScaleSpeedSpec to_natural_scale(const DiffusionSpec& spec, std::optional<double> c, const ScaleOptions& options) {
    if (!spec.is_ito() && spec.direct().natural) return spec.direct();
    const ScaleSpeed ss = build_scale_speed(spec, c, options);
    const Interval& d = spec.domain();
    const auto identity = [](double y) { return y; };
    const auto one = [](double) { return 1.0; };

    if (is_natural_scale(spec)) {
        return ScaleSpeedSpec{identity, one, [ss](double x) { return ss.speed.density(x); }, d, spec.atoms(),
                              [ss](double a, double b) { return ss.speed.interior_mass(a, b); }, true};
    }

    const double sl = ss.scale.end_value(Side::Left);
    const double sr = ss.scale.end_value(Side::Right);
    if (std::isnan(sl) || std::isnan(sr))
        throw InversionError("scale limit at a boundary could not be decided; natural-scale domain unknown");
    const Interval nd(sl, sr, d.left_closed() && std::isfinite(sl), d.right_closed() && std::isfinite(sr));
    auto to_x = [ss, d, sl, sr](double y) {
        if (y <= sl) return d.left();
        if (y >= sr) return d.right();
        return ss.scale.inverse(y);
    };
    return ScaleSpeedSpec{identity,
                          one,
                          [ss, to_x](double y) {
                              const double x = to_x(y);
                              return ss.speed.density(x) / ss.scale.derivative(x);
                          },
                          nd,
                          spec.atoms(),
                          [ss, to_x](double a, double b) { return ss.speed.interior_mass(to_x(a), to_x(b)); },
                          true};
}

}  // namespace difflab
