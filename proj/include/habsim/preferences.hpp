#pragma once

#include <cmath>
#include <stdexcept>

namespace habsim {

/// Time-separable power utility over the consumption-to-habit ratio,
///   U(t, x) = e^{-delta t} x^{1-gamma} / (1 - gamma),  gamma > 1,
/// together with the inverse-marginal maps and the two concave conjugates
/// entering the dual objective.
struct Preferences {
    double gamma = 10.0;  // relative risk aversion
    double delta = 0.03;  // subjective discount rate per year

    void validate() const {
        // gamma = 1 (log utility) degenerates the ratio inverse marginal:
        // U'(t, I) I would be constant in I. Rejected rather than special-cased.
        if (!(gamma > 1.0)) throw std::invalid_argument("preferences: gamma must be > 1");
        if (!(delta >= 0.0)) throw std::invalid_argument("preferences: delta must be >= 0");
    }

    double utility(double t, double x) const {
        require_positive(x);
        return std::exp(-delta * t) * std::pow(x, 1.0 - gamma) / (1.0 - gamma);
    }

    /// U'(t, x) = e^{-delta t} x^{-gamma}.
    double marginal(double t, double x) const {
        require_positive(x);
        return std::exp(-delta * t) * std::pow(x, -gamma);
    }

    /// I(t, x): the unique solution of U'(t, I) * I = x,
    /// in closed form (x e^{delta t})^{1/(1-gamma)}.
    double inverse_ratio_marginal(double t, double x) const {
        require_positive(x);
        return std::exp(log_inverse_ratio_marginal(t, std::log(x)));
    }

    /// log I(t, e^{log_x}); numerically stable form used along paths.
    double log_inverse_ratio_marginal(double t, double log_x) const {
        return (log_x + delta * t) / (1.0 - gamma);
    }

    /// Ihat(t, x): the inverse of marginal utility, U'(t, Ihat) = x,
    /// in closed form (x e^{delta t})^{-1/gamma}.
    double inverse_marginal(double t, double x) const {
        require_positive(x);
        return std::exp(-(std::log(x) + delta * t) / gamma);
    }

    /// V1(t, x) = inf_z { -U(t, e^{-z}) - x z } = -U(t, I(t,x)) + x log I(t,x)
    ///          = (x / (1-gamma)) (log(x e^{delta t}) - 1) for power utility.
    double conjugate_v1(double t, double x) const {
        require_positive(x);
        return x / (1.0 - gamma) * (std::log(x) + delta * t - 1.0);
    }

    /// V2(x) = inf_z { e^z - x z } = x - x log x.
    static double conjugate_v2(double x) {
        if (!(x > 0.0)) throw std::domain_error("conjugate_v2: argument must be > 0");
        return x - x * std::log(x);
    }

private:
    static void require_positive(double x) {
        if (!(x > 0.0)) throw std::domain_error("preferences: argument must be > 0");
    }
};

}  // namespace habsim
