#include "difflab/quad.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>

#include "difflab/errors.hpp"

namespace difflab::quad {

double Tolerance::bound(double value) const noexcept { return std::max(abs, rel * std::fabs(value)); }

namespace {

constexpr std::array<double, 11> xgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};

constexpr std::array<double, 11> wgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600801478532, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};

constexpr std::array<double, 5> wg = {0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
                                      0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
                                      0.295524224714752870173892994651338};

double sample(const Integrand& f, double x, double a, double b) {
    double v = f(x);
    if (std::isfinite(v)) return v;
    const double toward = 0.5 * (a + b) - x;
    for (int k = 40; k >= 20; k -= 4) {
        const double y = x + toward * std::ldexp(1.0, -k);
        if (y <= a || y >= b) continue;
        v = f(y);
        if (std::isfinite(v)) return v;
    }
    throw ExpressionError("integrand is not finite near x = " + std::to_string(x));
}

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

}  // namespace

Estimate gauss_kronrod(const Integrand& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = sample(f, center, a, b);
    double resk = fc * wgk[10];
    double resabs = std::fabs(resk);
    double resg = 0.0;
    std::array<double, 10> f1{}, f2{};
    for (int j = 0; j < 10; ++j) {
        const double dx = half * xgk[j];
        f1[j] = sample(f, center - dx, a, b);
        f2[j] = sample(f, center + dx, a, b);
        resk += wgk[j] * (f1[j] + f2[j]);
        resabs += wgk[j] * (std::fabs(f1[j]) + std::fabs(f2[j]));
        if (j % 2 == 1) resg += wg[j / 2] * (f1[j] + f2[j]);
    }
    const double mean = 0.5 * resk;
    double resasc = wgk[10] * std::fabs(fc - mean);
    for (int j = 0; j < 10; ++j) resasc += wgk[j] * (std::fabs(f1[j] - mean) + std::fabs(f2[j] - mean));

    const double abs_half = std::fabs(half);
    resasc *= abs_half;
    resabs *= abs_half;
    double err = std::fabs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    const double round = 50.0 * std::numeric_limits<double>::epsilon() * resabs;
    if (resabs > std::numeric_limits<double>::min() / round) err = std::max(round, err);
    return {resk * half, err, 21, 1};
}

Estimate integrate_compact(const Integrand& f, double a, double b, const Tolerance& tol, int max_intervals) {
    if (!(a < b)) {
        if (a == b) return {};
        throw PreconditionError("integrate_compact requires a < b");
    }
    std::priority_queue<Panel> heap;
    Estimate first = gauss_kronrod(f, a, b);
    heap.push({a, b, first.value, first.error});
    double total = first.value;
    double error = first.error;
    int evaluations = first.evaluations;
    while (error > tol.bound(total)) {
        if (static_cast<int>(heap.size()) >= max_intervals)
            throw QuadratureError("subdivision limit reached on [" + std::to_string(a) + ", " + std::to_string(b) +
                                  "]");
        const Panel worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            if (worst.error <= 1e3 * std::numeric_limits<double>::epsilon() * std::fabs(total) + tol.abs) break;
            throw QuadratureError("interval too small to subdivide near x = " + std::to_string(mid));
        }
        heap.pop();
        const Estimate l = gauss_kronrod(f, worst.a, mid);
        const Estimate r = gauss_kronrod(f, mid, worst.b);
        evaluations += l.evaluations + r.evaluations;
        heap.push({worst.a, mid, l.value, l.error});
        heap.push({mid, worst.b, r.value, r.error});
        total += l.value + r.value - worst.value;
        error += l.error + r.error - worst.error;
        if (error < 0.0) error = 0.0;
    }
    const int intervals = static_cast<int>(heap.size());
    total = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    return {total, error, evaluations, intervals};
}

const char* to_string(Verdict::Outcome outcome) noexcept {
    switch (outcome) {
        case Verdict::Outcome::Finite: return "finite";
        case Verdict::Outcome::Diverges: return "diverges";
        case Verdict::Outcome::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

Verdict integrate_improper(const Integrand& f, double a, double endpoint, const Tolerance& tol,
                           const ImproperOptions& options) {
    if (!(a == a) || !(endpoint == endpoint) || a == endpoint || !std::isfinite(a))
        throw PreconditionError("integrate_improper needs a finite start distinct from the endpoint");

    const double sign = endpoint > a ? 1.0 : -1.0;
    const bool infinite = std::isinf(endpoint);
    const double width = options.width > 0.0 ? options.width : std::max(1.0, std::fabs(a));

    const Integrand checked = [&](double x) {
        const double v = f(x);
        if (v < -tol.abs) throw NegativeIntegrand("integrand is negative (" + std::to_string(v) +
                                                  ") at x = " + std::to_string(x));
        return v;
    };

    auto cut = [&](int k) {
        if (infinite) return a + sign * width * std::ldexp(1.0, k);
        return endpoint - (endpoint - a) * std::ldexp(1.0, -(k + 1));
    };

    Verdict out;
    std::vector<double> increments;
    double sum = 0.0;
    double quad_error = 0.0;
    double previous_value = std::numeric_limits<double>::quiet_NaN();
    int rising = 0;
    double lo = a;

    auto finish = [&](Verdict::Outcome o, double value, double err, std::string reason) {
        out.outcome = o;
        out.value = value;
        out.error = err;
        out.reason = std::move(reason);
        return out;
    };

    for (int k = 0; k < options.stages; ++k) {
        const double hi = cut(k);
        if (!std::isfinite(hi) || hi == lo)
            return finish(Verdict::Outcome::Inconclusive, sum, quad_error, "cut points reached the resolution limit");
        const double left = std::min(lo, hi);
        const double right = std::max(lo, hi);
        Estimate piece;
        try {
            Tolerance stage_tol{tol.rel * 0.1, tol.abs * 1e-3};
            piece = integrate_compact(checked, left, right, stage_tol);
        } catch (const NegativeIntegrand&) {
            throw;
        } catch (const Error& e) {
            return finish(Verdict::Outcome::Inconclusive, sum, quad_error, e.what());
        }
        lo = hi;
        const double inc = std::max(0.0, piece.value);
        sum += inc;
        quad_error += piece.error;
        out.partial_sums.push_back(sum);
        if (!std::isfinite(sum))
            return finish(Verdict::Outcome::Inconclusive, sum, quad_error, "partial sum overflowed");
        increments.push_back(inc);

        const std::size_t n = increments.size();
        if (n >= 2) {
            if (inc >= increments[n - 2] * (1.0 - options.slack) && inc > 0.0)
                ++rising;
            else
                rising = 0;
        }
        const double first = out.partial_sums.front();
        if (rising >= options.run_length)
            return finish(Verdict::Outcome::Diverges, sum, quad_error,
                          std::to_string(rising) + " consecutive non-decreasing increments");
        if (first > 0.0 && sum > options.blow_up * first && rising >= 1)
            return finish(Verdict::Outcome::Diverges, sum, quad_error, "partial sums exceeded the blow-up factor");

        if (n < 3) continue;
        const double i1 = increments[n - 2];
        const double i2 = increments[n - 3];
        if (inc == 0.0 && i1 == 0.0) {
            if (quad_error <= tol.bound(sum))
                return finish(Verdict::Outcome::Finite, sum, quad_error, "increments vanished");
            continue;
        }
        if (i1 <= 0.0 || i2 <= 0.0) continue;
        const double r = inc / i1;
        const double r_prev = i1 / i2;
        if (!(r < 0.98) || std::fabs(r - r_prev) > 0.5 * (1.0 - r)) {
            previous_value = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double tail = inc * r / (1.0 - r);
        const double value = sum + tail;
        if (std::isfinite(previous_value)) {
            const double err = quad_error + std::fabs(value - previous_value);
            if (err <= tol.bound(value)) return finish(Verdict::Outcome::Finite, value, err, "geometric tail");
        }
        previous_value = value;
    }
    return finish(Verdict::Outcome::Inconclusive, sum, quad_error, "stage budget exhausted");
}

}  // namespace difflab::quad
