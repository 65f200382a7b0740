#pragma once

#include <optional>
#include <string>
#include <vector>

#include "habsim/approx.hpp"
#include "habsim/duality.hpp"
#include "habsim/market.hpp"

namespace habsim {

enum class ApproxSelection { bbl, dual, both };

/// Flat key=value experiment configuration. Defaults are the baseline used
/// throughout: X0=20, T=10, gamma=10, delta=0.03, alpha=beta=0.1, mu=0.05,
/// r=0.01, sigma=0.2, 10000 paths, 40 steps.
struct ExperimentConfig {
    MarketParams market;
    Preferences prefs;
    HabitParams habit;
    double x0 = 20.0;
    TimeGrid grid;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 42;
    ApproxSelection approximation = ApproxSelection::both;
    CondExpBackend backend = CondExpBackend::analytic;
    int inner_paths = 256;
    int threads = 0;  // runtime knob, not part of the serialized config

    ModelParams model() const { return {market, prefs, habit}; }
    void validate() const;
};

/// Parses key=value lines ('#' comments, blank lines allowed).
ExperimentConfig parse_config_text(const std::string& text);
/// Applies one KEY=VALUE override in place. Unknown keys raise ConfigError.
void apply_override(ExperimentConfig& config, const std::string& key,
                    const std::string& value);
/// Round-trip serialization: parse(serialize(c)) == c field by field.
std::string serialize_config(const ExperimentConfig& config);

struct ApproxOutcome {
    ApproxKind kind = ApproxKind::bbl;
    double eta_star = 1.0;
    double budget_residual = 0.0;
    ValueEstimate primal;
    ValueEstimate dual_candidate;
    double eta_prime_candidate = 1.0;
    double implied_budget_residual = 0.0;
    std::vector<double> primal_per_path;
    std::vector<double> dual_per_path;
};

struct CrossValidation {
    int nodes = 0;
    int outside_three_se = 0;
    double max_abs_z = 0.0;
};

struct RunResult {
    ExperimentConfig config;
    std::vector<ApproxOutcome> outcomes;
    std::size_t selected = 0;               // index of the smallest upper bound
    std::vector<WelfareReport> reports;     // parallel to outcomes
    std::optional<CrossValidation> cross_validation;
    double runtime_seconds = 0.0;           // reported on stderr, not serialized
};

/// Full certification run: simulate, calibrate each requested approximation,
/// build its dual pair, evaluate J and V on common random numbers, select the
/// smallest upper bound, and convert gaps into welfare losses.
RunResult run_experiment(const ExperimentConfig& config);

/// Deterministic JSON report (embeds the config and seed; no volatile fields).
std::string run_report_json(const RunResult& result);

/// Analytic-vs-nested agreement of the forward conditional expectations at
/// randomly sampled (path, node) pairs.
CrossValidation cross_validate(const Approximation& approx, const PathBatch& batch,
                               double eta_star, int n_nodes, int inner_paths,
                               std::uint64_t seed, int threads = 0);

struct Table1Row {
    std::string sweep_param;
    double sweep_value = 0.0;
    ApproxKind kind = ApproxKind::bbl;
    WelfareReport report;
    std::uint64_t seed = 0;
};

/// The four one-parameter sweeps around the baseline (gamma, X0, alpha=beta,
/// T), two rows per cell. Cells run sequentially; paths may use threads.
std::vector<Table1Row> table1_rows(const ExperimentConfig& base);
std::string table1_csv(const std::vector<Table1Row>& rows);

/// Per-time quantiles (5/25/50/75/95%) of chat, h, c' and psi' paths.
/// Variables are emitted as "<approx>.<name>" with name in
/// {chat, h, cprime, psi}; an empty variable list yields a header-only file.
std::string plot_csv(const ExperimentConfig& config,
                     const std::vector<std::string>& variables);

}  // namespace habsim
