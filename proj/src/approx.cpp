#include "habsim/approx.hpp"

#include <cmath>
#include <stdexcept>

#include "habsim/calibrate.hpp"
#include "habsim/errors.hpp"
#include "habsim/quadrature.hpp"
#include "habsim/util.hpp"

namespace habsim {

const char* to_string(ApproxKind kind) {
    return kind == ApproxKind::bbl ? "bbl" : "dual";
}

Approximation::Approximation(ApproxKind kind, const ModelParams& model,
                             const TimeGrid& grid)
    : kind_(kind), model_(model), grid_(grid) {
    model_.validate();
    grid_.validate();
}

double Approximation::marginal_annuity_rate() const {
    const double lam = model_.market.lambda();
    const double m_drift = model_.market.r + 0.5 * lam * lam;
    const double qq = q();
    return model_.prefs.delta / model_.prefs.gamma + qq * m_drift -
           0.5 * qq * qq * lam * lam;
}

double Approximation::marginal_annuity(double t) const {
    return expint_ratio(marginal_annuity_rate(), grid_.horizon - t);
}

double Approximation::log_bbl_brace(double t) const {
    return std::log1p(model_.habit.beta *
                      annuity_factor(kappa(), grid_.horizon - t, model_.market));
}

// Exponent of E[theta*_s / theta*_t | . ] as a Gaussian moment. y_shift
// carries the loading target of the A-increment term, lt_variance the
// variance of log M_t when the expectation is taken unconditionally.
double Approximation::theta_ratio_exponent(double t, double s, double y_shift,
                                           double lt_variance) const {
    const double gamma = model_.prefs.gamma;
    const double delta = model_.prefs.delta;
    const double alpha = model_.habit.alpha;
    const double beta = model_.habit.beta;
    const double lam = model_.market.lambda();
    const double m_drift = model_.market.r + 0.5 * lam * lam;
    const double qq = q();
    const double kab = gamma * alpha + (1.0 - gamma) * beta;
    const double tau = s - t;
    const double c = -beta * qq / gamma;  // weight of int_t^s X_u du

    const double det = -(delta / gamma) * tau -
                       (beta * qq / gamma) * 0.5 * delta * (s * s - t * t) -
                       (kab / gamma) * (marginal_annuity(s) - marginal_annuity(t));
    const double a_loading = -(beta * qq / gamma) * tau;
    const double gmean = -m_drift * (qq * tau + 0.5 * c * tau * tau);
    const double gvar = lam * lam *
                        (qq * qq * tau + qq * c * tau * tau + c * c * tau * tau * tau / 3.0);
    return det + a_loading * y_shift + 0.5 * a_loading * a_loading * lt_variance +
           gmean + 0.5 * gvar;
}

double Approximation::theta_ratio_expectation(double t, double eta) const {
    const double lam = model_.market.lambda();
    const double m_drift = model_.market.r + 0.5 * lam * lam;
    const double y = std::log(eta) - m_drift * t;  // unconditional mean of log eta M_t
    const double lt_var = lam * lam * t;
    return adaptive_simpson(
        [&](double s) { return std::exp(theta_ratio_exponent(t, s, y, lt_var)); }, t,
        grid_.horizon);
}

double Approximation::theta_ratio_expectation_conditional(double t, double y) const {
    return adaptive_simpson(
        [&](double s) { return std::exp(theta_ratio_exponent(t, s, y, 0.0)); }, t,
        grid_.horizon);
}

double Approximation::habit_gap(double t, double eta) const {
    return marginal_annuity(t) - theta_ratio_expectation(t, eta);
}

double Approximation::running_term(double t, double log_spd_integral, double eta) const {
    const double gamma = model_.prefs.gamma;
    const double delta = model_.prefs.delta;
    return -(t * std::log(eta) + 0.5 * delta * t * t + log_spd_integral) / gamma +
           marginal_annuity(t);
}

double Approximation::expanded_running_term(double t, double log_spd_integral,
                                            double eta) const {
    const double gamma = model_.prefs.gamma;
    const double delta = model_.prefs.delta;
    const double alpha = model_.habit.alpha;
    const double beta = model_.habit.beta;
    const double kab = gamma * alpha + (1.0 - gamma) * beta;
    return beta * q() * (t * std::log(eta) + log_spd_integral + 0.5 * delta * t * t) +
           kab * marginal_annuity(t);
}

DualExpansionTerms Approximation::dual_expansion_terms(double t, const MarkovState& state,
                                                       double eta) const {
    const double gamma = model_.prefs.gamma;
    const double delta = model_.prefs.delta;
    DualExpansionTerms out;
    out.marginal_annuity = marginal_annuity(t);
    out.running_term = running_term(t, state.log_spd_integral, eta);
    out.expanded_running = expanded_running_term(t, state.log_spd_integral, eta);
    out.theta_expectation = theta_ratio_expectation(t, eta);
    out.habit_gap = out.marginal_annuity - out.theta_expectation;
    const double log_theta = q() * std::log(eta) + q() * state.log_spd -
                             delta * t / gamma - out.expanded_running / gamma;
    out.theta_star = std::exp(log_theta);
    return out;
}

double Approximation::psi_star(double t, const MarkovState& state, double eta) const {
    const double gamma = model_.prefs.gamma;
    const double delta = model_.prefs.delta;
    const double phat = expanded_running_term(t, state.log_spd_integral, eta);
    const double log_theta =
        q() * std::log(eta) + q() * state.log_spd - delta * t / gamma - phat / gamma;
    return std::exp(log_theta + model_.habit.alpha * theta_ratio_expectation(t, eta));
}

double Approximation::loading_spd_integral() const {
    if (kind_ == ApproxKind::bbl) return 0.0;
    const double gamma = model_.prefs.gamma;
    return model_.habit.beta / (gamma * gamma);
}

double Approximation::det_log_ratio(double t, double log_eta) const {
    const double gamma = model_.prefs.gamma;
    const double delta = model_.prefs.delta;
    if (kind_ == ApproxKind::bbl)
        return -(log_eta + delta * t + log_bbl_brace(t)) / gamma;

    const double alpha = model_.habit.alpha;
    const double beta = model_.habit.beta;
    const double f = marginal_annuity(t);
    const double p_det = -(t * log_eta + 0.5 * delta * t * t) / gamma + f;
    double gap_term = 0.0;
    if (alpha != 0.0) {
        const double gap = f - theta_ratio_expectation(t, std::exp(log_eta));
        gap_term = alpha * gamma / (1.0 - gamma) * gap;
    }
    return -(log_eta + delta * t + beta * p_det + gap_term) / gamma;
}

double Approximation::log_ratio(double t, double log_spd, double log_spd_integral,
                                double eta) const {
    return det_log_ratio(t, std::log(eta)) + loading_log_spd() * log_spd +
           loading_spd_integral() * log_spd_integral;
}

double Approximation::ratio(double t, const MarkovState& state, double eta) const {
    return std::exp(log_ratio(t, state.log_spd, state.log_spd_integral, eta));
}

void Approximation::fill_batch(PathBatch& batch, double eta, int threads) const {
    if (!(eta > 0.0)) throw std::invalid_argument("approx: eta must be > 0");
    const double log_eta = std::log(eta);
    const std::size_t n_points = grid_.n_points();
    std::vector<double> det(n_points);
    for (std::size_t k = 0; k < n_points; ++k)
        det[k] = det_log_ratio(grid_.time(k), log_eta);
    const double b_l = loading_log_spd();
    const double b_a = loading_spd_integral();
    const double kap = kappa();
    const double beta = model_.habit.beta;

    parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto lm = batch.log_spd.row(i);
            auto a = batch.log_spd_integral.row(i);
            auto ratio_row = batch.log_ratio.row(i);
            for (std::size_t k = 0; k < n_points; ++k)
                ratio_row[k] = det[k] + b_l * lm[k] + b_a * a[k];
            exp_decay_integral_into(ratio_row, kap, beta, grid_, batch.log_habit.row(i));
        }
    });
}

double Approximation::sample_budget(const PathBatch& batch, int threads) const {
    const std::size_t n_points = grid_.n_points();
    const double dt = grid_.dt();
    std::vector<double> per_path(batch.n_paths);
    parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto lm = batch.log_spd.row(i);
            auto chat = batch.log_ratio.row(i);
            auto hab = batch.log_habit.row(i);
            double acc = 0.0;
            for (std::size_t k = 0; k < n_points; ++k)
                acc += trapezoid_weight(k, n_points, dt) *
                       std::exp(lm[k] + chat[k] + hab[k]);
            per_path[i] = acc;
        }
    });
    return pairwise_sum(per_path) / static_cast<double>(batch.n_paths);
}

CalibrationResult Approximation::calibrate(PathBatch& batch, double x0,
                                           int threads) const {
    if (!(x0 > 0.0)) throw std::invalid_argument("approx: x0 must be > 0");
    // Strictly decreasing in eta: c' scales like eta^{-k(t)} with k(t) > 0.
    const auto budget_at = [&](double log_eta) {
        fill_batch(batch, std::exp(log_eta), threads);
        return sample_budget(batch, threads);
    };
    const auto root = bisect_decreasing(budget_at, x0);
    const double final_budget = budget_at(root.log_root);
    const double residual = std::abs(final_budget - x0) / x0;
    if (residual > 1e-3)
        throw CalibrationError("approx: calibrated budget residual exceeds 1e-3");
    return {std::exp(root.log_root), residual, root.iterations};
}

ExpAffineSpec deflated_consumption_spec(const Approximation& approx, double eta,
                                        double t, double s, const MarkovState& state) {
    if (!(s >= t)) throw std::invalid_argument("deflated_consumption_spec: s < t");
    const double log_eta = std::log(eta);
    const double b_l = approx.loading_log_spd();
    const double b_a = approx.loading_spd_integral();
    const double beta = approx.model().habit.beta;
    const double kap = approx.kappa();
    const double tau = s - t;

    const double af = expint_ratio(kap, tau);                       // int e^{-k y} dy
    const double j1 = tau * expint_ratio(kap, tau) - expint_ratio_linear(kap, tau);

    ExpAffineSpec spec;
    spec.t = t;
    spec.s = s;
    spec.b_end = 1.0 + b_l;

    const double kd = adaptive_simpson(
        [&](double u) {
            return std::exp(-kap * (s - u)) * approx.det_log_ratio(u, log_eta);
        },
        t, s);
    const double load_spd = 1.0 + b_l + b_a * tau + beta * (b_a * j1 + b_l * af);
    const double load_int = b_a * (1.0 + beta * af);
    const double load_hab = std::exp(-kap * tau);
    spec.a0 = approx.det_log_ratio(s, log_eta) + beta * kd + load_spd * state.log_spd +
              load_int * state.log_spd_integral + load_hab * state.log_habit;

    // Weight on X_v: the A_s loading of log chat_s plus the habit integral of
    // log chat's stochastic part, which is an iterated kernel.
    spec.weight.add(b_a, 0, 0.0);
    Kernel habit_outer;
    habit_outer.add(beta * b_l, 0, kap);
    Kernel running_inner;
    running_inner.add(b_a / b_l, 0, 0.0);
    for (const auto& term : flatten_iterated(habit_outer, running_inner).terms())
        spec.weight.add(term.coef, term.power, term.rate);
    return spec;
}

DeflatedConsumptionTable::DeflatedConsumptionTable(const Approximation& approx,
                                                   double eta, int refine)
    : approx_(approx), eta_(eta), refine_(refine) {
    if (refine_ < 1) throw std::invalid_argument("deflated table: refine must be >= 1");
    const TimeGrid& grid = approx.grid();
    const std::size_t n_fine = static_cast<std::size_t>(grid.n_steps) * refine_;
    h_ = grid.dt() / refine_;
    const double log_eta = std::log(eta);
    const double b_l = approx.loading_log_spd();
    const double b_a = approx.loading_spd_integral();
    const double beta = approx.model().habit.beta;
    const double kap = approx.kappa();

    // d(u) on a half-step lattice so the cumulative integral of e^{k u} d(u)
    // keeps Simpson accuracy per cell.
    std::vector<double> d_half(2 * n_fine + 1);
    for (std::size_t j = 0; j < d_half.size(); ++j)
        d_half[j] = approx.det_log_ratio(0.5 * h_ * static_cast<double>(j), log_eta);

    det_.resize(n_fine + 1);
    cum_.resize(n_fine + 1);
    cum_[0] = 0.0;
    for (std::size_t j = 0; j <= n_fine; ++j) {
        det_[j] = d_half[2 * j];
        if (j == 0) continue;
        const double u0 = h_ * static_cast<double>(j - 1);
        const double um = u0 + 0.5 * h_;
        const double u1 = u0 + h_;
        const double g0 = std::exp(kap * u0) * d_half[2 * j - 2];
        const double gm = std::exp(kap * um) * d_half[2 * j - 1];
        const double g1 = std::exp(kap * u1) * d_half[2 * j];
        cum_[j] = cum_[j - 1] + h_ / 6.0 * (g0 + 4.0 * gm + g1);
    }

    Kernel weight;
    weight.add(b_a, 0, 0.0);
    Kernel habit_outer;
    habit_outer.add(beta * b_l, 0, kap);
    Kernel running_inner;
    running_inner.add(b_a / b_l, 0, 0.0);
    for (const auto& term : flatten_iterated(habit_outer, running_inner).terms())
        weight.add(term.coef, term.power, term.rate);

    const double b_end = 1.0 + b_l;
    load_spd_.resize(n_fine + 1);
    load_int_.resize(n_fine + 1);
    load_hab_.resize(n_fine + 1);
    gauss_.resize(n_fine + 1);
    for (std::size_t m = 0; m <= n_fine; ++m) {
        const double tau = h_ * static_cast<double>(m);
        const double af = expint_ratio(kap, tau);
        const double j1 = tau * af - expint_ratio_linear(kap, tau);
        load_spd_[m] = 1.0 + b_l + b_a * tau + beta * (b_a * j1 + b_l * af);
        load_int_[m] = b_a * (1.0 + beta * af);
        load_hab_[m] = std::exp(-kap * tau);
        gauss_[m] = exp_affine_log_moment(b_end, weight, tau, approx.model().market);
    }
}

double DeflatedConsumptionTable::log_point(std::size_t k, std::size_t j,
                                           const MarkovState& state) const {
    const std::size_t base = k * static_cast<std::size_t>(refine_);
    const std::size_t m = j - base;
    const double s = h_ * static_cast<double>(j);
    const double kap = approx_.kappa();
    const double beta = approx_.model().habit.beta;
    const double kd = std::exp(-kap * s) * (cum_[j] - cum_[base]);
    return det_[j] + beta * kd + load_spd_[m] * state.log_spd +
           load_int_[m] * state.log_spd_integral + load_hab_[m] * state.log_habit +
           gauss_[m];
}

Grid2D DeflatedConsumptionTable::forward_integral(const PathBatch& batch,
                                                  int threads) const {
    const TimeGrid& grid = approx_.grid();
    const std::size_t n_points = grid.n_points();
    const std::size_t n_fine = static_cast<std::size_t>(grid.n_steps) * refine_;
    const double kap = approx_.kappa();
    Grid2D out(batch.n_paths, n_points, 0.0);

    parallel_for(batch.n_paths, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> scratch(n_fine + 1);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t k = 0; k < n_points; ++k) {
                const std::size_t base = k * static_cast<std::size_t>(refine_);
                if (base >= n_fine) {
                    out(i, k) = 0.0;
                    continue;
                }
                MarkovState state{grid.time(k), batch.log_spd(i, k),
                                  batch.log_spd_integral(i, k), batch.log_habit(i, k)};
                const std::size_t len = n_fine - base;
                for (std::size_t m = 0; m <= len; ++m)
                    scratch[m] = std::exp(log_point(k, base + m, state) -
                                          kap * h_ * static_cast<double>(m));
                out(i, k) = integrate_table(scratch, h_, 0, len);
            }
        }
    });
    return out;
}

namespace {

// Precomputes the deterministic part of log chat on the remaining grid so the
// inner-path functionals stay cheap per path.
std::vector<double> det_tail(const Approximation& approx, double eta,
                             const MarkovState& state) {
    const TimeGrid& grid = approx.grid();
    const double dt = grid.dt();
    const double log_eta = std::log(eta);
    const std::size_t node = static_cast<std::size_t>(std::llround(state.t / dt));
    const std::size_t steps = static_cast<std::size_t>(grid.n_steps) - node;
    std::vector<double> det(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j)
        det[j] = approx.det_log_ratio(grid.time(node + j), log_eta);
    return det;
}

}  // namespace

InnerFunctional deflated_consumption_functional(const Approximation& approx, double eta,
                                                const MarkovState& state) {
    auto det = det_tail(approx, eta, state);
    const double b_l = approx.loading_log_spd();
    const double b_a = approx.loading_spd_integral();
    const double beta = approx.model().habit.beta;
    const double kap = approx.kappa();
    const double dt = approx.grid().dt();
    const double h0 = state.log_habit;
    const double decay = std::exp(-kap * dt);
    const double w = beta * dt * std::exp(-0.5 * kap * dt);

    return [det, b_l, b_a, kap, dt, h0, decay, w, t0 = state.t](
               std::span<const double> times, std::span<const double> log_spd,
               std::span<const double> log_int) {
        double acc = 0.0;
        double log_h = h0;
        const std::size_t n = times.size();
        for (std::size_t j = 0; j < n; ++j) {
            const double log_chat = det[j] + b_l * log_spd[j] + b_a * log_int[j];
            const double weight = (j == 0 || j + 1 == n) ? 0.5 * dt : dt;
            acc += weight * std::exp(-kap * (times[j] - t0) + log_spd[j] + log_chat + log_h);
            log_h = decay * log_h + w * log_chat;
        }
        return n > 1 ? acc : 0.0;
    };
}

InnerFunctional deflated_consumption_point_functional(const Approximation& approx,
                                                      double eta,
                                                      const MarkovState& state,
                                                      std::size_t horizon_index) {
    auto det = det_tail(approx, eta, state);
    const double b_l = approx.loading_log_spd();
    const double b_a = approx.loading_spd_integral();
    const double dt = approx.grid().dt();
    const double kap = approx.kappa();
    const double beta = approx.model().habit.beta;
    const double h0 = state.log_habit;
    const double decay = std::exp(-kap * dt);
    const double w = beta * dt * std::exp(-0.5 * kap * dt);

    return [det, b_l, b_a, h0, decay, w, horizon_index](
               std::span<const double>, std::span<const double> log_spd,
               std::span<const double> log_int) {
        double log_h = h0;
        for (std::size_t j = 0; j < horizon_index; ++j) {
            const double log_chat = det[j] + b_l * log_spd[j] + b_a * log_int[j];
            log_h = decay * log_h + w * log_chat;
        }
        const double log_chat = det[horizon_index] + b_l * log_spd[horizon_index] +
                                b_a * log_int[horizon_index];
        return std::exp(log_spd[horizon_index] + log_chat + log_h);
    };
}

InnerFunctional theta_ratio_functional(const Approximation& approx, double eta,
                                       const MarkovState& state) {
    const double gamma = approx.model().prefs.gamma;
    const double delta = approx.model().prefs.delta;
    const double dt = approx.grid().dt();
    const double qq = approx.q();

    return [&approx, eta, gamma, delta, dt, qq, t0 = state.t](
               std::span<const double> times, std::span<const double> log_spd,
               std::span<const double> log_int) {
        const std::size_t n = times.size();
        const double phat0 = approx.expanded_running_term(t0, log_int[0], eta);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double phat = approx.expanded_running_term(times[j], log_int[j], eta);
            const double log_ratio = qq * (log_spd[j] - log_spd[0]) -
                                     delta * (times[j] - t0) / gamma -
                                     (phat - phat0) / gamma;
            const double weight = (j == 0 || j + 1 == n) ? 0.5 * dt : dt;
            acc += weight * std::exp(log_ratio);
        }
        return n > 1 ? acc : 0.0;
    };
}

}  // namespace habsim
