#include "habsim/duality.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "habsim/calibrate.hpp"
#include "habsim/condexp.hpp"
#include "habsim/errors.hpp"

namespace habsim {

ValueEstimate primal_value(const PathBatch& batch, const Preferences& prefs,
                           int threads, std::vector<double>* per_path) {
    const std::size_t n_points = batch.grid.n_points();
    const double dt = batch.grid.dt();
    const double gamma = prefs.gamma;
    const double delta = prefs.delta;
    std::vector<double> values(batch.n_paths);
    parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto chat = batch.log_ratio.row(i);
            double acc = 0.0;
            for (std::size_t k = 0; k < n_points; ++k) {
                const double t = batch.grid.time(k);
                acc += trapezoid_weight(k, n_points, dt) *
                       std::exp(-delta * t + (1.0 - gamma) * chat[k]) / (1.0 - gamma);
            }
            values[i] = acc;
        }
    });
    const auto stats = mean_std_error(values);
    if (per_path) *per_path = std::move(values);
    return {stats.mean, stats.std_error};
}

namespace {

// E_t(i,k) via the nested oracle: one inner Monte Carlo per (path, node).
Grid2D nested_forward_integral(const Approximation& approx, const PathBatch& batch,
                               double eta_star, int inner_paths, std::uint64_t seed,
                               int threads) {
    const TimeGrid& grid = approx.grid();
    const std::size_t n_points = grid.n_points();
    const double log_eta = std::log(eta_star);
    const double b_l = approx.loading_log_spd();
    const double b_a = approx.loading_spd_integral();
    const double beta = approx.model().habit.beta;
    const double kap = approx.kappa();
    const double dt = grid.dt();
    const double decay = std::exp(-kap * dt);
    const double w = beta * dt * std::exp(-0.5 * kap * dt);

    std::vector<double> det(n_points);
    for (std::size_t k = 0; k < n_points; ++k)
        det[k] = approx.det_log_ratio(grid.time(k), log_eta);

    Grid2D out(batch.n_paths, n_points, 0.0);
    parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t k = 0; k + 1 < n_points; ++k) {
                const MarkovState state{grid.time(k), batch.log_spd(i, k),
                                        batch.log_spd_integral(i, k),
                                        batch.log_habit(i, k)};
                const InnerFunctional f =
                    [&, k](std::span<const double> times, std::span<const double> lspd,
                           std::span<const double> lint) {
                        double acc = 0.0;
                        double log_h = state.log_habit;
                        const std::size_t n = times.size();
                        for (std::size_t j = 0; j < n; ++j) {
                            const double log_chat =
                                det[k + j] + b_l * lspd[j] + b_a * lint[j];
                            const double weight = (j == 0 || j + 1 == n) ? 0.5 * dt : dt;
                            acc += weight * std::exp(-kap * (times[j] - state.t) +
                                                     lspd[j] + log_chat + log_h);
                            log_h = decay * log_h + w * log_chat;
                        }
                        return acc;
                    };
                out(i, k) = nested_mc(approx.model().market, grid, state,
                                      static_cast<int>(k),
                                      static_cast<std::uint32_t>(i), seed, inner_paths, f)
                                .estimate;
            }
        }
    });
    return out;
}

}  // namespace

DualBuild build_dual_controls(const Approximation& approx, const PathBatch& batch,
                              double eta_star, double x0, CondExpBackend backend,
                              int inner_paths, std::uint64_t seed, int threads) {
    const TimeGrid& grid = approx.grid();
    const std::size_t n_points = grid.n_points();
    const double beta = approx.model().habit.beta;
    const Preferences& prefs = approx.model().prefs;
    const double dt = grid.dt();
    const double kap = approx.kappa();

    // base_t = M_t c'_t + beta E[int_t^T e^{-kappa(s-t)} M_s c'_s ds | F_t];
    // psi' = eta' * base is linear in eta', so the V2 argument stays c'_t for
    // every eta' and only the budget normalisation below moves.
    Grid2D log_base(batch.n_paths, n_points);
    {
        Grid2D forward;
        if (beta > 0.0) {
            forward = (backend == CondExpBackend::nested)
                          ? nested_forward_integral(approx, batch, eta_star, inner_paths,
                                                    seed, threads)
                          : DeflatedConsumptionTable(approx, eta_star)
                                .forward_integral(batch, threads);
        }
        std::atomic<std::size_t> bad{0};
        parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
            std::size_t local_bad = 0;
            for (std::size_t i = begin; i < end; ++i) {
                for (std::size_t k = 0; k < n_points; ++k) {
                    const double deflated = std::exp(batch.log_spd(i, k) +
                                                     batch.log_ratio(i, k) +
                                                     batch.log_habit(i, k));
                    const double base =
                        deflated + (beta > 0.0 ? beta * forward(i, k) : 0.0);
                    if (!(base > 0.0) || !std::isfinite(base)) ++local_bad;
                    log_base(i, k) = std::log(base);
                }
            }
            bad += local_bad;
        });
        if (bad > 0)
            throw InfeasibleDualError(
                "duality: non-positive dual control encountered",
                static_cast<double>(bad) /
                    static_cast<double>(batch.n_paths * n_points));
    }

    // eta' roots the budget of the plan implied back through the second
    // duality relation chat = I(t, psi'), habit and level regenerated from it.
    const auto implied_budget = [&](double log_eta) {
        std::vector<double> per_path(batch.n_paths);
        parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
            std::vector<double> log_ratio(n_points), log_habit(n_points);
            for (std::size_t i = begin; i < end; ++i) {
                for (std::size_t k = 0; k < n_points; ++k)
                    log_ratio[k] = prefs.log_inverse_ratio_marginal(
                        grid.time(k), log_eta + log_base(i, k));
                exp_decay_integral_into(log_ratio, kap, beta, grid, log_habit);
                double acc = 0.0;
                for (std::size_t k = 0; k < n_points; ++k)
                    acc += trapezoid_weight(k, n_points, dt) *
                           std::exp(batch.log_spd(i, k) + log_ratio[k] + log_habit[k]);
                per_path[i] = acc;
            }
        });
        return pairwise_sum(per_path) / static_cast<double>(batch.n_paths);
    };

    const auto root = bisect_decreasing(implied_budget, x0);
    const double eta_prime = std::exp(root.log_root);
    const double residual = std::abs(implied_budget(root.log_root) - x0) / x0;
    if (residual > 1e-3)
        throw CalibrationError("duality: implied budget residual exceeds 1e-3");

    DualBuild out;
    out.controls.eta_prime = eta_prime;
    out.controls.psi = Grid2D(batch.n_paths, n_points);
    out.controls.v2_argument = Grid2D(batch.n_paths, n_points);
    parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t k = 0; k < n_points; ++k) {
                out.controls.psi(i, k) = eta_prime * std::exp(log_base(i, k));
                out.controls.v2_argument(i, k) =
                    std::exp(batch.log_ratio(i, k) + batch.log_habit(i, k));
            }
        }
    });
    out.budget_residual = residual;
    out.iterations = root.iterations;
    return out;
}

ValueEstimate dual_value(const DualControls& controls, double x0,
                         const PathBatch& batch, const Preferences& prefs,
                         int threads, std::vector<double>* per_path) {
    const std::size_t n_points = batch.grid.n_points();
    const double dt = batch.grid.dt();
    const double gamma = prefs.gamma;
    const double delta = prefs.delta;
    const double eta = controls.eta_prime;
    if (!(eta > 0.0)) throw std::invalid_argument("dual_value: eta' must be > 0");

    std::atomic<std::size_t> bad{0};
    std::vector<double> values(batch.n_paths);
    parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
        std::size_t local_bad = 0;
        for (std::size_t i = begin; i < end; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n_points; ++k) {
                const double psi = controls.psi(i, k);
                const double arg = controls.v2_argument(i, k);
                if (!(psi > 0.0) || !(arg > 0.0) || !std::isfinite(psi) ||
                    !std::isfinite(arg)) {
                    ++local_bad;
                    continue;
                }
                const double t = batch.grid.time(k);
                const double v1 =
                    psi / (1.0 - gamma) * (std::log(psi) + delta * t - 1.0);
                const double v2 = arg - arg * std::log(arg);
                const double spd = std::exp(batch.log_spd(i, k));
                acc += trapezoid_weight(k, n_points, dt) * (-v1 - eta * spd * v2);
            }
            values[i] = acc;
        }
        bad += local_bad;
    });
    if (bad > 0)
        throw InfeasibleDualError(
            "duality: V2 argument or psi non-positive",
            static_cast<double>(bad) / static_cast<double>(batch.n_paths * n_points));

    const auto stats = mean_std_error(values);
    if (per_path) *per_path = std::move(values);
    return {stats.mean + eta * x0, stats.std_error};
}

double duality_gap(double primal, double dual) { return dual - primal; }

double welfare_loss(double gap, double eta_prime, double x0) {
    if (!(eta_prime > 0.0))
        throw std::invalid_argument("welfare_loss: eta' must be > 0");
    if (!(x0 > 0.0)) throw std::invalid_argument("welfare_loss: x0 must be > 0");
    return gap / (eta_prime * x0);
}

}  // namespace habsim
