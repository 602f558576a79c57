#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "difflab/model.hpp"
#include "difflab/potential.hpp"

namespace difflab::mc {

/// Philox4x32-10 counter-based bijection.
struct Philox4x32 {
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block counter, Key key) noexcept;
};

/// Sequential generator over the Philox counter space for key (seed, index).
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t index) noexcept;

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform() noexcept;
    /// Standard normal by Box-Muller.
    double normal() noexcept;

private:
    void refill() noexcept;

    Philox4x32::Key key_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
    std::uint64_t counter_ = 0;
    Philox4x32::Block block_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct SimConfig {
    double dt = 1e-4;
    std::size_t n_paths = 100000;
    double horizon = 10.0;
    std::uint64_t seed = 0;
    int workers = 1;
    /// Brownian-bridge test for barrier crossings between grid points.
    bool bridge = true;
    /// Local step control: each step moves at most this fraction of the distance
    /// to the nearest open finite end (or of max(1, |x|)) in drift and in one standard deviation.
    double step_fraction = 0.1;
    double overflow = 1e12;

    /// Throws PreconditionError unless 0 < dt < horizon, n_paths >= 100 and workers >= 1.
    void validate() const;
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_effective = 0;
    double truncation_fraction = 0.0;  // paths still running at the horizon
    std::size_t breaches = 0;          // steps that left the state space through an open end and were retried
    std::optional<std::pair<double, double>> bracket;
    bool flagged = false;
    std::string note;

    /// |mean - value| within k standard errors, widened by the bracket when present.
    bool agrees_with(double value, double k = 3.0) const noexcept;
};

/// Path i runs on stream (seed, i mod workers); each stream serves its paths in increasing order.
/// The sink receives (path, t, x) for every step of the first max_paths paths, in path order.
/// Throws UnsupportedBoundary for a reflecting or sticky atom, BlowUp past the overflow guard.
void simulate_paths(const DiffusionSpec& spec, double x0, const SimConfig& config,
                    const std::function<void(std::size_t, double, double)>& sink, std::size_t max_paths);

/// Terminal value X at the horizon (or where the path was absorbed) for each path.
std::vector<double> terminal_values(const DiffusionSpec& spec, double x0, const SimConfig& config);

struct WindowEstimates {
    Estimate hitting;  // P_x(tau_b < tau_a) over decided paths
    Estimate exit;     // E_x[tau_a ^ tau_b ^ horizon]; flagged when truncation is at least 1e-3
};

WindowEstimates estimate_window(const DiffusionSpec& spec, double x, const CompactWindow& window,
                                const SimConfig& config);
Estimate estimate_hitting_prob(const DiffusionSpec& spec, double x, const CompactWindow& window,
                               const SimConfig& config);
Estimate estimate_exit_time(const DiffusionSpec& spec, double x, const CompactWindow& window,
                            const SimConfig& config);

/// E_x[X_t] - x. Throws PreconditionError when the drift is not zero.
Estimate estimate_martingale_gap(const DiffusionSpec& spec, double x, double t, const SimConfig& config);

/// E_x|X_t|.
Estimate estimate_abs_moment(const DiffusionSpec& spec, double x, double t, const SimConfig& config);

/// E_x[exp(-alpha tau_y)]. Paths that have not hit y by the horizon count as 0 in the mean;
/// the bracket adds exp(-alpha horizon) for each of them.
Estimate estimate_laplace(const DiffusionSpec& spec, double alpha, double x, double y, const SimConfig& config);

struct LaplaceSample {
    Estimate transform;
    double hit_fraction_by = 0.0;  // fraction with tau_y <= t
};

/// Laplace estimate together with the fraction of paths with tau_y <= t.
LaplaceSample estimate_laplace_with_tail(const DiffusionSpec& spec, double alpha, double x, double y, double t,
                                         const SimConfig& config);

/// DIFFLAB_WORKERS when set to a positive integer, otherwise the hardware concurrency (at least 1).
int default_workers();

}  // namespace difflab::mc
