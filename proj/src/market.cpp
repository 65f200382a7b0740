#include "habsim/market.hpp"

#include <cmath>
#include <stdexcept>

#include "habsim/rng.hpp"

namespace habsim {

void MarketParams::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("market: sigma must be > 0");
    if (!std::isfinite(r) || !std::isfinite(mu) || !std::isfinite(sigma))
        throw std::invalid_argument("market: parameters must be finite");
}

double market_price_of_risk(const MarketParams& params) {
    params.validate();
    return params.lambda();
}

void TimeGrid::validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("grid: horizon must be > 0");
    if (n_steps < 1) throw std::invalid_argument("grid: n_steps must be >= 1");
}

PathBatch simulate_paths_with(const MarketParams& params, const TimeGrid& grid,
                              std::size_t n_paths, const NoiseFn& normal_draw,
                              int threads) {
    params.validate();
    grid.validate();
    if (n_paths < 1) throw std::invalid_argument("market: n_paths must be >= 1");

    PathBatch batch(grid, n_paths);
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const double lam = params.lambda();
    const double drift = -(params.r + 0.5 * lam * lam) * dt;

    parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto w = batch.brownian.row(i);
            auto lm = batch.log_spd.row(i);
            auto a = batch.log_spd_integral.row(i);
            w[0] = 0.0;
            lm[0] = 0.0;  // M_0 = 1
            a[0] = 0.0;
            for (int k = 0; k < grid.n_steps; ++k) {
                const double dw =
                    sqrt_dt * normal_draw(static_cast<std::uint32_t>(i),
                                          static_cast<std::uint32_t>(k));
                w[k + 1] = w[k] + dw;
                lm[k + 1] = lm[k] + drift - lam * dw;
                a[k + 1] = a[k] + 0.5 * dt * (lm[k] + lm[k + 1]);
            }
        }
    });
    return batch;
}

PathBatch simulate_paths(const MarketParams& params, const TimeGrid& grid,
                         std::size_t n_paths, std::uint64_t seed, int threads) {
    const NoiseFn draw = [seed](std::uint32_t path, std::uint32_t step) {
        return rng::standard_normal(seed, rng::Stream::outer_paths, path, 0, 0, step);
    };
    return simulate_paths_with(params, grid, n_paths, draw, threads);
}

double spd_moment(double q, double tau, const MarketParams& params) {
    if (tau < 0.0) throw std::invalid_argument("spd_moment: tau must be >= 0");
    const double lam = params.lambda();
    return std::exp(-q * (params.r + 0.5 * lam * lam) * tau +
                    0.5 * q * q * lam * lam * tau);
}

}  // namespace habsim
