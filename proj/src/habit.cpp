#include "habsim/habit.hpp"

#include <cmath>
#include <stdexcept>

namespace habsim {

void HabitParams::validate() const {
    if (!(beta >= 0.0)) throw std::invalid_argument("habit: beta must be >= 0");
    if (!(alpha >= beta)) throw std::invalid_argument("habit: alpha must be >= beta");
}

void exp_decay_integral_into(std::span<const double> x, double kappa, double weight,
                             const TimeGrid& grid, std::span<double> out) {
    if (x.size() != grid.n_points() || out.size() != x.size())
        throw std::invalid_argument("habit: path length does not match grid");
    const double dt = grid.dt();
    const double decay = std::exp(-kappa * dt);
    const double w = weight * dt * std::exp(-0.5 * kappa * dt);
    double y = 0.0;
    for (std::size_t k = 0; k + 1 < x.size(); ++k) {
        const double next = decay * y + w * x[k];
        out[k] = y;
        y = next;
    }
    out[x.size() - 1] = y;
}

std::vector<double> exp_decay_integral(std::span<const double> x, double kappa,
                                       double weight, const TimeGrid& grid) {
    std::vector<double> y(x.size());
    exp_decay_integral_into(x, kappa, weight, grid, y);
    return y;
}

std::vector<double> integrate_log_habit(std::span<const double> log_c,
                                        const HabitParams& hp, const TimeGrid& grid) {
    hp.validate();
    return exp_decay_integral(log_c, hp.alpha, hp.beta, grid);
}

RatioLevel ratio_and_level(std::span<const double> log_ratio, const HabitParams& hp,
                           const TimeGrid& grid) {
    hp.validate();
    RatioLevel out;
    out.log_habit = exp_decay_integral(log_ratio, hp.decay_gap(), hp.beta, grid);
    out.log_level.resize(log_ratio.size());
    for (std::size_t k = 0; k < log_ratio.size(); ++k)
        out.log_level[k] = log_ratio[k] + out.log_habit[k];
    return out;
}

}  // namespace habsim
