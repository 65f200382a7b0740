#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "habsim/market.hpp"

namespace habsim {

/// One weight-kernel term coef * (s-u)^power * exp(-rate * (s-u)), power in {0,1}.
/// Kernels multiply (log M_u - log M_t) under an integral over u in [t, s].
struct KernelTerm {
    double coef = 0.0;
    int power = 0;
    double rate = 0.0;
};

/// Piecewise-analytic weight kernel w(u) = sum of KernelTerms.
class Kernel {
public:
    Kernel() = default;
    explicit Kernel(std::vector<KernelTerm> terms) : terms_(std::move(terms)) {}

    void add(double coef, int power, double rate);
    bool empty() const { return terms_.empty(); }
    std::span<const KernelTerm> terms() const { return terms_; }

    /// w evaluated at distance-to-endpoint z = s - u.
    double eval(double z) const;

    /// Closed-form tail mass int_{s-z}^{s} w(u) du = int_0^z y^p e^{-rate y} dy terms.
    double tail_integral(double z) const;

private:
    std::vector<KernelTerm> terms_;
};

/// Canonical form of every conditional expectation used by the dual-control
/// machinery: with X_u := log(M_u / M_t) Gaussian given F_t,
///   E[ exp( a0 + b_end X_s + int_t^s w(u) X_u du ) | F_t ]
/// has closed second-order structure. a0 absorbs all deterministic terms and
/// the loadings on time-t state variables.
struct ExpAffineSpec {
    double t = 0.0;
    double s = 0.0;
    double a0 = 0.0;
    double b_end = 0.0;
    Kernel weight;
};

/// Evaluates the spec exactly. Writing the Gaussian exponent as an Ito
/// integral gives mean = -(r + lambda^2/2) * I1 and variance = lambda^2 * I2
/// with
///   I1 = int_0^tau (b_end + Wbar(x)) dx,
///   I2 = int_0^tau (b_end + Wbar(x))^2 dx,   Wbar(x) = int_{t+x}^s w(u) du,
/// both computed by adaptive Simpson at 1e-12 absolute tolerance.
double cond_exp_exp_affine(const ExpAffineSpec& spec, const MarketParams& params);

/// E[ int_t^T e^{-kappa (s-t)} M_s / M_t ds | F_t ] under constant
/// coefficients: (1 - e^{-(kappa+r) tau}) / (kappa + r), with the
/// kappa + r -> 0 limit equal to tau.
double annuity_factor(double kappa, double tau, const MarketParams& params);

/// (1 - e^{-a x}) / a with the a -> 0 limit x; shared discounting helper.
double expint_ratio(double a, double x);

/// int_0^x y e^{-a y} dy with the a -> 0 limit x^2/2.
double expint_ratio_linear(double a, double x);

/// mean + variance/2 of the Gaussian exponent b_end X_s + int_t^s w(u) X_u du
/// given F_t; the log-correction every exponential-affine expectation carries.
double exp_affine_log_moment(double b_end, const Kernel& weight, double tau,
                             const MarketParams& params);

/// Fubini-flattening of an iterated kernel: the weight on X_v implied by
///   int_t^s k_outer(s-u) [ X_u + int_t^u k_inner(u-v) X_v dv ] du
/// is k_outer(s-v) + int_v^s k_outer(s-u) k_inner(u-v) du, returned as a
/// single Kernel with analytic antiderivatives. Only pure-exponential
/// (power 0) term pairs are supported.
Kernel flatten_iterated(const Kernel& outer, const Kernel& inner);

/// Sufficient statistic of a path at time t: both consumption approximations
/// depend only on (t, log M_t, int_0^t log M ds); the habit continuation
/// additionally needs log h_t.
struct MarkovState {
    double t = 0.0;
    double log_spd = 0.0;
    double log_spd_integral = 0.0;
    double log_habit = 0.0;
};

struct NestedResult {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Functional of one inner path; arrays run from the conditioning node to the
/// horizon (inclusive), log_spd and log_spd_integral in absolute terms.
using InnerFunctional = std::function<double(
    std::span<const double> times, std::span<const double> log_spd,
    std::span<const double> log_spd_integral)>;

/// Monte Carlo oracle for E[ f | F_t ]: re-simulates n_inner paths forward
/// from the given state on the same grid. Inner streams derive from
/// (seed, outer_path, node_index, inner id), so nodes can run in parallel.
NestedResult nested_mc(const MarketParams& params, const TimeGrid& grid,
                       const MarkovState& state, int node_index,
                       std::uint32_t outer_path, std::uint64_t seed, int n_inner,
                       const InnerFunctional& functional);

}  // namespace habsim
