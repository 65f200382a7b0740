#pragma once

#include <span>
#include <vector>

#include "habsim/market.hpp"

namespace habsim {

/// Geometric habit level h_t = exp(beta * int_0^t e^{-alpha (t-s)} log c_s ds).
/// alpha is the depreciation rate, beta the persistence weight. alpha >= beta
/// is required for concavity of the consumption problem; alpha = beta = 0
/// recovers a model without habit formation (h == 1).
struct HabitParams {
    double alpha = 0.1;
    double beta = 0.1;

    /// Decay rate of the habit recursion when driven by ratio consumption.
    double decay_gap() const { return alpha - beta; }
    void validate() const;
};

/// Discrete exponential-kernel integral
///   y_{k+1} = e^{-kappa dt} y_k + weight * dt * e^{-kappa dt/2} * x_k,  y_0 = 0,
/// approximating weight * int_0^t e^{-kappa (t-s)} x_s ds with the decay
/// sampled at the cell midpoint. Exact as a recursion; O(dt^2) against the
/// continuum for smooth x.
std::vector<double> exp_decay_integral(std::span<const double> x, double kappa,
                                       double weight, const TimeGrid& grid);

/// Allocation-free variant for per-path hot loops; out may alias x.
void exp_decay_integral_into(std::span<const double> x, double kappa, double weight,
                             const TimeGrid& grid, std::span<double> out);

/// log h along a consumption-level path: beta * int_0^t e^{-alpha(t-s)} log c_s ds.
std::vector<double> integrate_log_habit(std::span<const double> log_c,
                                        const HabitParams& hp, const TimeGrid& grid);

struct RatioLevel {
    std::vector<double> log_habit;
    std::vector<double> log_level;
};

/// Habit and level consumption generated by a ratio-consumption path:
///   log h_t = beta * int_0^t e^{-(alpha-beta)(t-s)} log chat_s ds,
///   log c_t = log chat_t + log h_t.
RatioLevel ratio_and_level(std::span<const double> log_ratio, const HabitParams& hp,
                           const TimeGrid& grid);

}  // namespace habsim
