#pragma once

#include <cstdint>
#include <vector>

#include "habsim/approx.hpp"
#include "habsim/market.hpp"
#include "habsim/preferences.hpp"
#include "habsim/util.hpp"

namespace habsim {

enum class CondExpBackend { analytic, nested, both };

/// A feasible dual pair (psi'_{i,t}, eta'). v2_argument holds the deflated
/// consumption (psi_t - beta E[int_t^T e^{-alpha(s-t)} psi_s ds | F_t]) / (eta M_t);
/// for controls built from the first duality relation this equals c'_t exactly
/// (Volterra inversion), which is how build_dual_controls fills it.
struct DualControls {
    Grid2D psi;
    Grid2D v2_argument;
    double eta_prime = 1.0;
};

struct ValueEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct DualBuild {
    DualControls controls;
    double budget_residual = 0.0;
    int iterations = 0;
};

/// J = E[int_0^T U(t, c_t/h_t) dt] on a filled batch. per_path, when given,
/// receives the pathwise time integrals (for gap standard errors).
ValueEstimate primal_value(const PathBatch& batch, const Preferences& prefs,
                           int threads = 0, std::vector<double>* per_path = nullptr);

/// Builds the dual pair implied by a calibrated approximation via the first
/// duality relation,
///   psi'_t = eta' [ M_t c'_t + beta E[int_t^T e^{-(alpha-beta)(s-t)} M_s c'_s ds | F_t] ],
/// with eta' rooted so the consumption plan implied back through I(t, psi')
/// meets the budget. The batch must be filled at eta_star.
DualBuild build_dual_controls(const Approximation& approx, const PathBatch& batch,
                              double eta_star, double x0, CondExpBackend backend,
                              int inner_paths, std::uint64_t seed, int threads = 0);

/// V = E[int_0^T { -V1(t, psi_t) - eta M_t V2(v2_argument) } dt] + eta X0.
/// Throws InfeasibleDualError if any psi or V2 argument is non-positive;
/// clamping would break the upper-bound guarantee.
ValueEstimate dual_value(const DualControls& controls, double x0,
                         const PathBatch& batch, const Preferences& prefs,
                         int threads = 0, std::vector<double>* per_path = nullptr);

/// D = V - J; non-negative up to Monte Carlo noise by weak duality.
double duality_gap(double primal, double dual);

/// Welfare loss C solving J(X0) = V(X0 [1 - C]): the dual objective is affine
/// in X0 with slope eta', so C = D / (eta' X0) in closed form.
double welfare_loss(double gap, double eta_prime, double x0);

/// Everything a single certification run reports for one approximation.
struct WelfareReport {
    double primal = 0.0;       // J
    double dual = 0.0;         // V (selected upper bound)
    double gap = 0.0;          // D = V - J
    double loss = 0.0;         // C as a fraction of X0
    double se_primal = 0.0;
    double se_dual = 0.0;
    double se_gap = 0.0;
    double eta_star = 1.0;
    double eta_prime = 1.0;
};

}  // namespace habsim
