#include "difflab/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <thread>

#include "difflab/errors.hpp"

namespace difflab::mc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Block Philox4x32::generate(Block c, Key k) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kW0;
        k[1] += kW1;
    }
    return c;
}

Stream::Stream(std::uint64_t seed, std::uint64_t index) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_lo_(static_cast<std::uint32_t>(index)),
      stream_hi_(static_cast<std::uint32_t>(index >> 32)) {}

void Stream::refill() noexcept {
    Philox4x32::Block ctr = {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                             stream_lo_, stream_hi_};
    block_ = Philox4x32::generate(ctr, key_);
    ++counter_;
    used_ = 0;
}

double Stream::uniform() noexcept {
    if (used_ >= 4) refill();
    const std::uint64_t bits = (static_cast<std::uint64_t>(block_[used_]) << 32) | block_[used_ + 1];
    used_ += 2;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

void SimConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("dt must be positive");
    if (!(dt < horizon)) throw PreconditionError("dt must be smaller than the horizon");
    if (n_paths < 100) throw PreconditionError("at least 100 paths are required");
    if (workers < 1) throw PreconditionError("workers must be positive");
    if (!(step_fraction > 0.0 && step_fraction <= 1.0)) throw PreconditionError("step fraction must lie in (0, 1]");
}

bool Estimate::agrees_with(double value, double k) const noexcept {
    const double slack = k * std::max(std::abs(std_error), 0.0);
    if (bracket) return value >= bracket->first - slack && value <= bracket->second + slack;
    return std::abs(mean - value) <= slack;
}

int default_workers() {
    if (const char* env = std::getenv("DIFFLAB_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

struct Outcome {
    double t = 0.0;
    double x = 0.0;
    int side = 0;  // -1 stopped at lo, +1 at hi, 0 still running at the horizon
    std::size_t breaches = 0;
};

class Simulator {
public:
    Simulator(const DiffusionSpec& spec, const SimConfig& config) : config_(config) {
        config.validate();
        if (!spec.is_ito()) throw PreconditionError("simulation needs Ito coefficients");
        const auto& c = spec.ito().coefficients;
        drift_ = c.drift;
        sigma_ = c.diffusion;
        domain_ = c.domain;
        for (Side s : {Side::Left, Side::Right}) {
            if (!domain_.closed(s)) continue;
            const auto atom = atom_on(spec.atoms(), s);
            if (atom && !atom->is_infinite())
                throw UnsupportedBoundary(std::string(s == Side::Left ? "left" : "right") +
                                          " boundary is reflecting or sticky; only absorption is simulated");
        }
        open_left_ = std::isfinite(domain_.left()) && !domain_.left_closed();
        open_right_ = std::isfinite(domain_.right()) && !domain_.right_closed();
    }

    const Interval& domain() const noexcept { return domain_; }

    /// Absorbing levels: closed finite ends act as barriers.
    std::pair<double, double> absorbing() const noexcept {
        return {domain_.left_closed() ? domain_.left() : -kInf, domain_.right_closed() ? domain_.right() : kInf};
    }

    template <class Sink>
    Outcome run(Stream& rng, double x0, double t_end, double lo, double hi, Sink&& sink) const {
        Outcome o;
        double x = x0;
        double t = 0.0;
        const double eta = config_.step_fraction;
        const double dt_floor = config_.dt * 1e-14;
        sink(t, x);
        while (t < t_end) {
            const double b = drift_(x);
            const double s = sigma_(x);
            if (!std::isfinite(b) || !std::isfinite(s))
                throw BlowUp("coefficients are not finite at x = " + std::to_string(x));
            double d = std::max(1.0, std::abs(x));
            if (open_left_) d = std::min(d, x - domain_.left());
            if (open_right_) d = std::min(d, domain_.right() - x);
            double h = std::min(config_.dt, t_end - t);
            if (s != 0.0) h = std::min(h, (eta * d / s) * (eta * d / s));
            if (b != 0.0) h = std::min(h, eta * d / std::abs(b));
            for (;;) {
                if (h < dt_floor) throw BlowUp("step size collapsed at x = " + std::to_string(x));
                const double xn = x + b * h + s * std::sqrt(h) * rng.normal();
                if (!std::isfinite(xn) || std::abs(xn) > config_.overflow)
                    throw BlowUp("path left the overflow guard at t = " + std::to_string(t));
                if (xn <= lo) return stop(o, t + h * (x - lo) / (x - xn), lo, -1, sink);
                if (xn >= hi) return stop(o, t + h * (hi - x) / (xn - x), hi, +1, sink);
                if (!domain_.in_interior(xn)) {
                    ++o.breaches;
                    h *= 0.5;
                    continue;
                }
                if (config_.bridge && s != 0.0) {
                    const double var = s * s * h;
                    for (int side : {-1, +1}) {
                        const double c = side < 0 ? lo : hi;
                        if (!std::isfinite(c)) continue;
                        const double expo = 2.0 * (x - c) * (xn - c) / var;
                        if (expo < 36.0 && rng.uniform() < std::exp(-expo))
                            return stop(o, t + 0.5 * h, c, side, sink);
                    }
                }
                x = xn;
                t += h;
                break;
            }
            sink(t, x);
        }
        o.t = t;
        o.x = x;
        o.side = 0;
        return o;
    }

private:
    template <class Sink>
    static Outcome stop(Outcome o, double t, double x, int side, Sink& sink) {
        o.t = t;
        o.x = x;
        o.side = side;
        sink(t, x);
        return o;
    }

    SimConfig config_;
    expr::Expr drift_;
    expr::Expr sigma_;
    Interval domain_ = Interval::real_line();
    bool open_left_ = false;
    bool open_right_ = false;
};

struct NoSink {
    void operator()(double, double) const noexcept {}
};

/// Runs every path on its stream; outcomes are indexed by path.
template <class Fn>
std::vector<Outcome> run_all(const SimConfig& config, Fn&& fn) {
    const std::size_t n = config.n_paths;
    const std::size_t W = static_cast<std::size_t>(config.workers);
    std::vector<Outcome> out(n);
    std::vector<std::exception_ptr> errors(W);
    auto work = [&](std::size_t w) {
        try {
            Stream rng(config.seed, w);
            for (std::size_t i = w; i < n; i += W) out[i] = fn(rng);
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (W == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(W);
        for (std::size_t w = 0; w < W; ++w) threads.emplace_back(work, w);
        for (auto& th : threads) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

Estimate finish(const std::vector<double>& values) {
    Estimate e;
    e.n_effective = values.size();
    if (values.empty()) return e;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    e.mean = mean;
    if (values.size() > 1) e.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1)) /
                                         std::sqrt(static_cast<double>(values.size()));
    return e;
}

std::size_t total_breaches(const std::vector<Outcome>& out) {
    std::size_t b = 0;
    for (const auto& o : out) b += o.breaches;
    return b;
}

void require_start(const Simulator& sim, double x) {
    if (!sim.domain().in_interior(x)) throw DomainError("start point must lie in the interior of the state space");
}

}  // namespace

void simulate_paths(const DiffusionSpec& spec, double x0, const SimConfig& config,
                    const std::function<void(std::size_t, double, double)>& sink, std::size_t max_paths) {
    const Simulator sim(spec, config);
    require_start(sim, x0);
    const auto [lo, hi] = sim.absorbing();
    const std::size_t n = std::min(max_paths, config.n_paths);
    const std::size_t W = static_cast<std::size_t>(config.workers);
    std::vector<Stream> streams;
    streams.reserve(W);
    for (std::size_t w = 0; w < W; ++w) streams.emplace_back(config.seed, w);
    for (std::size_t i = 0; i < n; ++i) {
        sim.run(streams[i % W], x0, config.horizon, lo, hi, [&](double t, double x) { sink(i, t, x); });
    }
}

std::vector<double> terminal_values(const DiffusionSpec& spec, double x0, const SimConfig& config) {
    const Simulator sim(spec, config);
    require_start(sim, x0);
    const auto [lo, hi] = sim.absorbing();
    const auto out = run_all(config, [&](Stream& rng) { return sim.run(rng, x0, config.horizon, lo, hi, NoSink{}); });
    std::vector<double> v(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) v[i] = out[i].x;
    return v;
}

WindowEstimates estimate_window(const DiffusionSpec& spec, double x, const CompactWindow& window,
                                const SimConfig& config) {
    const Simulator sim(spec, config);
    if (!window.in_interior(x)) throw DomainError("x must lie inside the window");
    const auto out =
        run_all(config, [&](Stream& rng) { return sim.run(rng, x, config.horizon, window.a(), window.b(), NoSink{}); });
    std::vector<double> hits, times;
    hits.reserve(out.size());
    times.reserve(out.size());
    std::size_t running = 0;
    for (const auto& o : out) {
        times.push_back(o.t);
        if (o.side == 0) {
            ++running;
        } else {
            hits.push_back(o.side > 0 ? 1.0 : 0.0);
        }
    }
    WindowEstimates w;
    w.hitting = finish(hits);
    w.exit = finish(times);
    const double frac = static_cast<double>(running) / static_cast<double>(out.size());
    w.hitting.truncation_fraction = w.exit.truncation_fraction = frac;
    w.hitting.breaches = w.exit.breaches = total_breaches(out);
    if (frac >= 1e-3) {
        w.exit.flagged = true;
        w.exit.note = "more than 0.1% of the paths reached the horizon";
    }
    return w;
}

Estimate estimate_hitting_prob(const DiffusionSpec& spec, double x, const CompactWindow& window,
                               const SimConfig& config) {
    return estimate_window(spec, x, window, config).hitting;
}

Estimate estimate_exit_time(const DiffusionSpec& spec, double x, const CompactWindow& window,
                            const SimConfig& config) {
    return estimate_window(spec, x, window, config).exit;
}

namespace {

Estimate terminal_statistic(const DiffusionSpec& spec, double x, double t, const SimConfig& config,
                            double (*transform)(double, double)) {
    SimConfig c = config;
    c.horizon = t;
    if (!(c.dt < t)) c.dt = t / 16.0;
    const Simulator sim(spec, c);
    require_start(sim, x);
    const auto [lo, hi] = sim.absorbing();
    const auto out = run_all(c, [&](Stream& rng) { return sim.run(rng, x, t, lo, hi, NoSink{}); });
    std::vector<double> v(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) v[i] = transform(out[i].x, x);
    Estimate e = finish(v);
    e.breaches = total_breaches(out);
    return e;
}

}  // namespace

Estimate estimate_martingale_gap(const DiffusionSpec& spec, double x, double t, const SimConfig& config) {
    if (!spec.is_ito() || !spec.ito().coefficients.drift.is_zero())
        throw PreconditionError("martingale gap needs a spec on natural scale (zero drift)");
    return terminal_statistic(spec, x, t, config, [](double xt, double x0) { return xt - x0; });
}

Estimate estimate_abs_moment(const DiffusionSpec& spec, double x, double t, const SimConfig& config) {
    return terminal_statistic(spec, x, t, config, [](double xt, double) { return std::abs(xt); });
}

LaplaceSample estimate_laplace_with_tail(const DiffusionSpec& spec, double alpha, double x, double y, double t,
                                         const SimConfig& config) {
    if (!(alpha > 0.0)) throw PreconditionError("alpha must be positive");
    const Simulator sim(spec, config);
    require_start(sim, x);
    if (!sim.domain().in_interior(y)) throw DomainError("target must lie in the interior of the state space");
    LaplaceSample r;
    if (x == y) {
        r.transform.mean = 1.0;
        r.transform.n_effective = config.n_paths;
        r.transform.bracket = std::pair{1.0, 1.0};
        r.hit_fraction_by = 1.0;
        return r;
    }
    auto [lo, hi] = sim.absorbing();
    if (y < x) lo = y;
    else hi = y;
    const int target = y < x ? -1 : +1;
    const auto out = run_all(config, [&](Stream& rng) { return sim.run(rng, x, config.horizon, lo, hi, NoSink{}); });
    std::vector<double> v(out.size());
    std::size_t running = 0, early = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const bool hit = out[i].side == target;
        v[i] = hit ? std::exp(-alpha * out[i].t) : 0.0;
        running += out[i].side == 0;
        early += hit && out[i].t <= t;
    }
    Estimate e = finish(v);
    const double frac = static_cast<double>(running) / static_cast<double>(out.size());
    e.truncation_fraction = frac;
    e.breaches = total_breaches(out);
    e.bracket = std::pair{e.mean, e.mean + frac * std::exp(-alpha * config.horizon)};
    r.transform = e;
    r.hit_fraction_by = static_cast<double>(early) / static_cast<double>(out.size());
    return r;
}

Estimate estimate_laplace(const DiffusionSpec& spec, double alpha, double x, double y, const SimConfig& config) {
    return estimate_laplace_with_tail(spec, alpha, x, y, config.horizon, config).transform;
}

}  // namespace difflab::mc
