#pragma once

#include <cstdint>
#include <functional>

#include "habsim/util.hpp"

namespace habsim {

/// Constant-coefficient market: money market at rate r, one stock with
/// drift mu and volatility sigma. The state price density follows
/// dM = -r M dt - lambda M dW with lambda = (mu - r) / sigma.
struct MarketParams {
    double r = 0.01;
    double mu = 0.05;
    double sigma = 0.2;

    double lambda() const { return (mu - r) / sigma; }
    void validate() const;
};

/// Market price of risk (mu - r) / sigma. Throws std::invalid_argument
/// when sigma <= 0.
double market_price_of_risk(const MarketParams& params);

/// Uniform grid t_k = k * dt on [0, T].
struct TimeGrid {
    double horizon = 10.0;
    int n_steps = 40;

    double dt() const { return horizon / n_steps; }
    std::size_t n_points() const { return static_cast<std::size_t>(n_steps) + 1; }
    double time(std::size_t k) const { return static_cast<double>(k) * dt(); }
    void validate() const;
};

/// Per-path arrays over the grid. brownian, log_spd and log_spd_integral are
/// produced by simulate_paths; log_ratio and log_habit are filled by the
/// consumption approximations. log_spd_integral is the trapezoid-accumulated
/// running integral of log_spd.
struct PathBatch {
    TimeGrid grid;
    std::size_t n_paths = 0;
    Grid2D brownian;
    Grid2D log_spd;
    Grid2D log_spd_integral;
    Grid2D log_ratio;
    Grid2D log_habit;

    PathBatch() = default;
    PathBatch(const TimeGrid& g, std::size_t n)
        : grid(g),
          n_paths(n),
          brownian(n, g.n_points()),
          log_spd(n, g.n_points()),
          log_spd_integral(n, g.n_points()),
          log_ratio(n, g.n_points()),
          log_habit(n, g.n_points()) {}
};

/// Brownian increment source: maps (path, step) to a standard normal draw
/// scaled by sqrt(dt) inside the simulator. Tests inject zero or scripted
/// noise through this hook.
using NoiseFn = std::function<double(std::uint32_t path, std::uint32_t step)>;

/// Simulates the state price density with the exact lognormal update
/// log M_{k+1} = log M_k - (r + lambda^2/2) dt - lambda dW_k, so M itself
/// carries no Euler bias; only the dt-integrals are grid-discretised.
/// Deterministic in (seed, n_paths) and independent of thread count.
PathBatch simulate_paths(const MarketParams& params, const TimeGrid& grid,
                         std::size_t n_paths, std::uint64_t seed, int threads = 0);

/// Same as simulate_paths but with caller-supplied standard normal draws.
PathBatch simulate_paths_with(const MarketParams& params, const TimeGrid& grid,
                              std::size_t n_paths, const NoiseFn& normal_draw,
                              int threads = 0);

/// Closed lognormal moment E[(M_s / M_t)^q | F_t]
///   = exp(-q (r + lambda^2/2) tau + q^2 lambda^2 tau / 2),  tau = s - t.
double spd_moment(double q, double tau, const MarketParams& params);

}  // namespace habsim
