#include "habsim/condexp.hpp"

#include <cmath>
#include <stdexcept>

#include "habsim/quadrature.hpp"
#include "habsim/rng.hpp"
#include "habsim/util.hpp"

namespace habsim {

namespace {

// int_0^z e^{-a y} dy
double tail0(double a, double z) {
    if (std::abs(a * z) < 1e-12) return z * (1.0 - 0.5 * a * z);
    return -std::expm1(-a * z) / a;
}

// int_0^z y e^{-a y} dy
double tail1(double a, double z) {
    const double w = a * z;
    if (std::abs(w) < 1e-4) {
        // series around w = 0 to dodge the cancellation in the closed form
        return z * z * (0.5 - w / 3.0 + w * w / 8.0 - w * w * w / 30.0);
    }
    return (-std::expm1(-w) - w * std::exp(-w)) / (a * a);
}

}  // namespace

void Kernel::add(double coef, int power, double rate) {
    if (power != 0 && power != 1)
        throw std::invalid_argument("kernel: only powers 0 and 1 are supported");
    if (coef != 0.0) terms_.push_back({coef, power, rate});
}

double Kernel::eval(double z) const {
    double w = 0.0;
    for (const auto& term : terms_) {
        double v = term.coef * std::exp(-term.rate * z);
        if (term.power == 1) v *= z;
        w += v;
    }
    return w;
}

double Kernel::tail_integral(double z) const {
    double w = 0.0;
    for (const auto& term : terms_)
        w += term.coef * (term.power == 0 ? tail0(term.rate, z) : tail1(term.rate, z));
    return w;
}

double exp_affine_log_moment(double b_end, const Kernel& weight, double tau,
                             const MarketParams& params) {
    if (tau == 0.0 || (b_end == 0.0 && weight.empty())) return 0.0;
    const double lam = params.lambda();
    const double m_drift = params.r + 0.5 * lam * lam;
    const auto loading = [&](double x) { return b_end + weight.tail_integral(tau - x); };
    const double i1 = adaptive_simpson([&](double x) { return loading(x); }, 0.0, tau);
    const double i2 = adaptive_simpson(
        [&](double x) {
            const double l = loading(x);
            return l * l;
        },
        0.0, tau);
    return -m_drift * i1 + 0.5 * lam * lam * i2;
}

double cond_exp_exp_affine(const ExpAffineSpec& spec, const MarketParams& params) {
    params.validate();
    if (!(spec.s >= spec.t))
        throw std::invalid_argument("cond_exp: evaluation time precedes conditioning time");
    return std::exp(spec.a0 +
                    exp_affine_log_moment(spec.b_end, spec.weight, spec.s - spec.t, params));
}

double expint_ratio(double a, double x) {
    if (std::abs(a * x) < 1e-12) return x * (1.0 - 0.5 * a * x);
    return -std::expm1(-a * x) / a;
}

double expint_ratio_linear(double a, double x) {
    return tail1(a, x);
}

double annuity_factor(double kappa, double tau, const MarketParams& params) {
    if (tau < 0.0) throw std::invalid_argument("annuity_factor: tau must be >= 0");
    return expint_ratio(kappa + params.r, tau);
}

Kernel flatten_iterated(const Kernel& outer, const Kernel& inner) {
    Kernel out;
    for (const auto& o : outer.terms()) out.add(o.coef, o.power, o.rate);
    for (const auto& o : outer.terms()) {
        for (const auto& i : inner.terms()) {
            if (o.power != 0 || i.power != 0)
                throw std::invalid_argument(
                    "flatten_iterated: unsupported kernel family (powers >= 1)");
            const double c = o.coef * i.coef;
            if (std::abs(o.rate - i.rate) <= 1e-9 * (1.0 + std::abs(o.rate))) {
                // equal decay rates collapse to a linear-in-(s-v) term
                out.add(c, 1, o.rate);
            } else {
                const double d = o.rate - i.rate;
                out.add(c / d, 0, i.rate);
                out.add(-c / d, 0, o.rate);
            }
        }
    }
    return out;
}

NestedResult nested_mc(const MarketParams& params, const TimeGrid& grid,
                       const MarkovState& state, int node_index,
                       std::uint32_t outer_path, std::uint64_t seed, int n_inner,
                       const InnerFunctional& functional) {
    params.validate();
    grid.validate();
    if (n_inner < 1) throw std::invalid_argument("nested_mc: n_inner must be >= 1");
    if (node_index < 0 || node_index > grid.n_steps)
        throw std::invalid_argument("nested_mc: node outside grid");

    const int steps = grid.n_steps - node_index;
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const double lam = params.lambda();
    const double drift = -(params.r + 0.5 * lam * lam) * dt;

    std::vector<double> times(steps + 1), log_spd(steps + 1), log_int(steps + 1);
    for (int j = 0; j <= steps; ++j) times[j] = grid.time(node_index + j);

    if (steps == 0) {
        times[0] = state.t;
        log_spd[0] = state.log_spd;
        log_int[0] = state.log_spd_integral;
        return {functional(times, log_spd, log_int), 0.0};
    }

    std::vector<double> samples(n_inner);
    for (int p = 0; p < n_inner; ++p) {
        log_spd[0] = state.log_spd;
        log_int[0] = state.log_spd_integral;
        for (int j = 0; j < steps; ++j) {
            const double dw =
                sqrt_dt * rng::standard_normal(seed, rng::Stream::inner_paths, outer_path,
                                               static_cast<std::uint32_t>(node_index),
                                               static_cast<std::uint32_t>(p),
                                               static_cast<std::uint32_t>(j));
            log_spd[j + 1] = log_spd[j] + drift - lam * dw;
            log_int[j + 1] = log_int[j] + 0.5 * dt * (log_spd[j] + log_spd[j + 1]);
        }
        samples[p] = functional(times, log_spd, log_int);
    }
    const auto stats = mean_std_error(samples);
    return {stats.mean, stats.std_error};
}

}  // namespace habsim
