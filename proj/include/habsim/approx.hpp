#pragma once

#include <cstdint>
#include <vector>

#include "habsim/condexp.hpp"
#include "habsim/habit.hpp"
#include "habsim/market.hpp"
#include "habsim/preferences.hpp"

namespace habsim {

enum class ApproxKind { bbl, dual };

const char* to_string(ApproxKind kind);

struct ModelParams {
    MarketParams market;
    Preferences prefs;
    HabitParams habit;

    void validate() const {
        market.validate();
        prefs.validate();
        habit.validate();
    }
};

/// Deterministic ingredients of the dual-based approximation at one state.
/// running_term is P_t, expanded_running is Phat_t, habit_gap is
/// Q_t = F(t) - E[int_t^T theta*_s / theta*_t ds]; theta_star is theta*_t.
struct DualExpansionTerms {
    double marginal_annuity = 0.0;      // F(t)
    double running_term = 0.0;          // P_t
    double expanded_running = 0.0;      // Phat_t
    double theta_expectation = 0.0;     // E[int_t^T theta*_s/theta*_t ds]
    double habit_gap = 0.0;             // Q_t
    double theta_star = 0.0;
};

struct CalibrationResult {
    double eta = 1.0;
    double budget_residual = 0.0;  // |budget - X0| / X0 at the root
    int iterations = 0;
};

/// One of the two analytical approximations to optimal ratio consumption.
///
/// Both are exponential-affine in (log M_t, int_0^t log M ds), which keeps
/// every conditional expectation downstream in closed form:
///   bbl:   chat_t = (eta e^{dt} M_t [1 + beta * annuity])^{-1/gamma}
///   dual:  chat_t = (eta e^{dt + beta P_t + (alpha gamma/(1-gamma)) Q_t} M_t)^{-1/gamma}
/// The theta-ratio expectation inside Q_t is evaluated unconditionally and
/// cached per grid, making Q a deterministic function of time (its state
/// dependence is second order in (alpha, beta); the conditional variant is
/// kept for oracle checks).
class Approximation {
public:
    Approximation(ApproxKind kind, const ModelParams& model, const TimeGrid& grid);

    ApproxKind kind() const { return kind_; }
    const ModelParams& model() const { return model_; }
    const TimeGrid& grid() const { return grid_; }

    /// 1 - 1/gamma; exponent of M_s in every deflated-marginal moment.
    double q() const { return 1.0 - 1.0 / model_.prefs.gamma; }
    /// alpha - beta; decay rate of the ratio-driven habit kernel.
    double kappa() const { return model_.habit.decay_gap(); }

    /// Effective discount rate of the deflated marginal-utility annuity.
    double marginal_annuity_rate() const;
    /// F(t) = E[int_t^T M_s (e^{ds} M_s)^{-1/g} ds | F_t] / (M_t (e^{dt} M_t)^{-1/g}),
    /// deterministic under constant coefficients.
    double marginal_annuity(double t) const;

    /// log of the braced factor 1 + beta * annuity in the bbl formula.
    double log_bbl_brace(double t) const;

    /// E[int_t^T theta*_s / theta*_t ds], determinised (unconditional law of
    /// log M_t) and in closed form up to one smooth quadrature.
    double theta_ratio_expectation(double t, double eta) const;
    /// Conditional variant, y = log eta + log M_t; oracle use only.
    double theta_ratio_expectation_conditional(double t, double y) const;

    /// Q_t = F(t) - theta_ratio_expectation(t).
    double habit_gap(double t, double eta) const;

    /// P_t and Phat_t at a state (affine in the running integral A_t).
    double running_term(double t, double log_spd_integral, double eta) const;
    double expanded_running_term(double t, double log_spd_integral, double eta) const;

    DualExpansionTerms dual_expansion_terms(double t, const MarkovState& state,
                                            double eta) const;

    /// psi*_t = theta*_t * exp(alpha * E[int_t^T theta*_s/theta*_t ds | F_t]).
    double psi_star(double t, const MarkovState& state, double eta) const;

    /// Loadings of log chat on log M_t and on A_t = int_0^t log M ds.
    double loading_log_spd() const { return -1.0 / model_.prefs.gamma; }
    double loading_spd_integral() const;

    /// Deterministic part of log chat_t (everything except the loadings).
    double det_log_ratio(double t, double log_eta) const;

    double log_ratio(double t, double log_spd, double log_spd_integral,
                     double eta) const;
    /// chat_t as a positive level; the spec-facing ratio operation.
    double ratio(double t, const MarkovState& state, double eta) const;

    /// Writes log chat and the habit it generates into the batch.
    void fill_batch(PathBatch& batch, double eta, int threads = 0) const;

    /// Monte Carlo estimate of E[int_0^T M_t c'_t dt] on a filled batch.
    double sample_budget(const PathBatch& batch, int threads = 0) const;

    /// Root of sample_budget(eta) = x0 by bisection on log eta (the budget is
    /// strictly decreasing in eta). Leaves the batch filled at the root.
    CalibrationResult calibrate(PathBatch& batch, double x0, int threads = 0) const;

private:
    double theta_ratio_exponent(double t, double s, double y_shift,
                                double lt_variance) const;

    ApproxKind kind_;
    ModelParams model_;
    TimeGrid grid_;
};

/// Affine spec of E[M_s c'_s | F_t] for a calibrated approximation; feeding it
/// to cond_exp_exp_affine gives the forward deflated-consumption kernel used
/// in the dual-control construction.
ExpAffineSpec deflated_consumption_spec(const Approximation& approx, double eta,
                                        double t, double s, const MarkovState& state);

/// Lattice cache of the spec above: 1-D tables in tau = s - t plus running
/// integrals, so per-path evaluation is table lookups and one exp per node.
class DeflatedConsumptionTable {
public:
    DeflatedConsumptionTable(const Approximation& approx, double eta, int refine = 4);

    /// log E[M_s c'_s | F_t] at grid node k, refined node j (s = j * dt/refine).
    double log_point(std::size_t k, std::size_t j, const MarkovState& state) const;

    /// E_t(i,k) = E[int_t^T e^{-kappa (s-t)} M_s c'_s ds | F_t] for every
    /// (path, node) of the batch, by Simpson on the refined lattice.
    Grid2D forward_integral(const PathBatch& batch, int threads = 0) const;

    int refine() const { return refine_; }

private:
    const Approximation& approx_;
    double eta_;
    int refine_;
    double h_;                       // dt / refine
    std::vector<double> det_;        // d(s_j) + kappa-decay cumulative pieces
    std::vector<double> cum_;        // C(s_j) = int_0^{s_j} e^{kappa u} d-density
    std::vector<double> load_spd_;   // loading on log M_t, indexed by m = j - R k
    std::vector<double> load_int_;   // loading on A_t
    std::vector<double> load_hab_;   // loading on log h_t
    std::vector<double> gauss_;      // mean + var/2, indexed by m
};

/// Inner-path functional for the nested oracle: int_t^T e^{-kappa(s-t)} M_s c'_s ds
/// evaluated along a re-simulated path, with the habit continued from the state.
InnerFunctional deflated_consumption_functional(const Approximation& approx, double eta,
                                                const MarkovState& state);

/// Inner-path functional for E[M_s c'_s | F_t] at a single horizon index.
InnerFunctional deflated_consumption_point_functional(const Approximation& approx,
                                                      double eta,
                                                      const MarkovState& state,
                                                      std::size_t horizon_index);

/// Inner-path functional for E[int_t^T theta*_s / theta*_t ds | F_t].
InnerFunctional theta_ratio_functional(const Approximation& approx, double eta,
                                       const MarkovState& state);

}  // namespace habsim
