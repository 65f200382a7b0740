#include "habsim/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "habsim/errors.hpp"
#include "habsim/quadrature.hpp"
#include "habsim/rng.hpp"

namespace habsim {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + value + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for " + key + ": '" + value + "'");
    }
}

std::string format_full(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string format_csv(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

std::string format_percent(double fraction) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", 100.0 * fraction);
    return buf;
}

const char* to_string(ApproxSelection s) {
    switch (s) {
        case ApproxSelection::bbl: return "bbl";
        case ApproxSelection::dual: return "dual";
        default: return "both";
    }
}

const char* to_string(CondExpBackend b) {
    switch (b) {
        case CondExpBackend::analytic: return "analytic";
        case CondExpBackend::nested: return "nested";
        default: return "both";
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    try {
        market.validate();
        prefs.validate();
        habit.validate();
        grid.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(x0 > 0.0)) throw ConfigError("config: x0 must be > 0");
    if (n_paths < 1) throw ConfigError("config: n_paths must be >= 1");
    if (inner_paths < 1) throw ConfigError("config: inner_paths must be >= 1");
}

void apply_override(ExperimentConfig& c, const std::string& key,
                    const std::string& value) {
    if (key == "r") c.market.r = parse_double(key, value);
    else if (key == "mu") c.market.mu = parse_double(key, value);
    else if (key == "sigma") c.market.sigma = parse_double(key, value);
    else if (key == "gamma") c.prefs.gamma = parse_double(key, value);
    else if (key == "delta") c.prefs.delta = parse_double(key, value);
    else if (key == "alpha") c.habit.alpha = parse_double(key, value);
    else if (key == "beta") c.habit.beta = parse_double(key, value);
    else if (key == "x0") c.x0 = parse_double(key, value);
    else if (key == "T") c.grid.horizon = parse_double(key, value);
    else if (key == "n_steps") c.grid.n_steps = static_cast<int>(parse_int(key, value));
    else if (key == "n_paths") {
        const long long n = parse_int(key, value);
        if (n < 0) throw ConfigError("config: n_paths must be >= 0");
        c.n_paths = static_cast<std::size_t>(n);
    } else if (key == "seed") {
        c.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "inner_paths") {
        c.inner_paths = static_cast<int>(parse_int(key, value));
    } else if (key == "approximation") {
        if (value == "bbl") c.approximation = ApproxSelection::bbl;
        else if (value == "dual") c.approximation = ApproxSelection::dual;
        else if (value == "both") c.approximation = ApproxSelection::both;
        else throw ConfigError("config: approximation must be bbl, dual or both");
    } else if (key == "backend") {
        if (value == "analytic") c.backend = CondExpBackend::analytic;
        else if (value == "nested") c.backend = CondExpBackend::nested;
        else if (value == "both") c.backend = CondExpBackend::both;
        else throw ConfigError("config: backend must be analytic, nested or both");
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key=value, got '" + line + "'");
        apply_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "r=" << format_full(c.market.r) << "\n";
    out << "mu=" << format_full(c.market.mu) << "\n";
    out << "sigma=" << format_full(c.market.sigma) << "\n";
    out << "gamma=" << format_full(c.prefs.gamma) << "\n";
    out << "delta=" << format_full(c.prefs.delta) << "\n";
    out << "alpha=" << format_full(c.habit.alpha) << "\n";
    out << "beta=" << format_full(c.habit.beta) << "\n";
    out << "x0=" << format_full(c.x0) << "\n";
    out << "T=" << format_full(c.grid.horizon) << "\n";
    out << "n_steps=" << c.grid.n_steps << "\n";
    out << "n_paths=" << c.n_paths << "\n";
    out << "seed=" << c.seed << "\n";
    out << "approximation=" << to_string(c.approximation) << "\n";
    out << "backend=" << to_string(c.backend) << "\n";
    out << "inner_paths=" << c.inner_paths << "\n";
    return out.str();
}

CrossValidation cross_validate(const Approximation& approx, const PathBatch& batch,
                               double eta_star, int n_nodes, int inner_paths,
                               std::uint64_t seed, int threads) {
    (void)threads;
    const TimeGrid& grid = approx.grid();
    const double beta = approx.model().habit.beta;
    const DeflatedConsumptionTable table(approx, eta_star);
    const std::size_t n_fine =
        static_cast<std::size_t>(grid.n_steps) * static_cast<std::size_t>(table.refine());

    CrossValidation out;
    out.nodes = n_nodes;
    for (int idx = 0; idx < n_nodes; ++idx) {
        const std::uint32_t id = static_cast<std::uint32_t>(idx);
        const double u1 = rng::uniform01(seed, rng::Stream::node_sampling, id, 0, 0, 0);
        const double u2 = rng::uniform01(seed, rng::Stream::node_sampling, id, 0, 0, 1);
        const std::size_t i = std::min<std::size_t>(
            batch.n_paths - 1, static_cast<std::size_t>(u1 * batch.n_paths));
        const std::size_t k = std::min<std::size_t>(
            static_cast<std::size_t>(grid.n_steps) - 1,
            static_cast<std::size_t>(u2 * grid.n_steps));
        const MarkovState state{grid.time(k), batch.log_spd(i, k),
                                batch.log_spd_integral(i, k), batch.log_habit(i, k)};

        double analytic = 0.0;
        NestedResult nested;
        if (beta > 0.0) {
            // forward deflated-consumption integral, the psi' kernel
            std::vector<double> scratch(n_fine + 1);
            const std::size_t base = k * static_cast<std::size_t>(table.refine());
            const double h = grid.dt() / table.refine();
            for (std::size_t m = 0; m <= n_fine - base; ++m)
                scratch[m] = std::exp(table.log_point(k, base + m, state) -
                                      approx.kappa() * h * static_cast<double>(m));
            analytic = integrate_table(scratch, h, 0, n_fine - base);
            nested = nested_mc(approx.model().market, grid, state, static_cast<int>(k),
                               static_cast<std::uint32_t>(i), seed, inner_paths,
                               deflated_consumption_functional(approx, eta_star, state));
        } else {
            // no habit term: check the terminal point expectation instead
            analytic = std::exp(table.log_point(k, n_fine, state));
            nested = nested_mc(approx.model().market, grid, state, static_cast<int>(k),
                               static_cast<std::uint32_t>(i), seed, inner_paths,
                               deflated_consumption_point_functional(
                                   approx, eta_star, state,
                                   static_cast<std::size_t>(grid.n_steps) - k));
        }
        const double se = std::max(nested.std_error, 1e-300);
        const double z = (analytic - nested.estimate) / se;
        out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
        if (std::abs(z) > 3.0) ++out.outside_three_se;
    }
    return out;
}

RunResult run_experiment(const ExperimentConfig& config) {
    const auto t_start = std::chrono::steady_clock::now();
    config.validate();

    RunResult result;
    result.config = config;

    const PathBatch base_batch = simulate_paths(config.market, config.grid,
                                                config.n_paths, config.seed,
                                                config.threads);

    std::vector<ApproxKind> kinds;
    if (config.approximation != ApproxSelection::dual) kinds.push_back(ApproxKind::bbl);
    if (config.approximation != ApproxSelection::bbl) kinds.push_back(ApproxKind::dual);

    for (ApproxKind kind : kinds) {
        ApproxOutcome outcome;
        outcome.kind = kind;
        const Approximation approx(kind, config.model(), config.grid);
        PathBatch batch = base_batch;
        const auto calib = approx.calibrate(batch, config.x0, config.threads);
        outcome.eta_star = calib.eta;
        outcome.budget_residual = calib.budget_residual;
        outcome.primal = primal_value(batch, config.prefs, config.threads,
                                      &outcome.primal_per_path);

        const CondExpBackend build_backend = config.backend == CondExpBackend::nested
                                                 ? CondExpBackend::nested
                                                 : CondExpBackend::analytic;
        const auto build =
            build_dual_controls(approx, batch, calib.eta, config.x0, build_backend,
                                config.inner_paths, config.seed, config.threads);
        outcome.eta_prime_candidate = build.controls.eta_prime;
        outcome.implied_budget_residual = build.budget_residual;
        outcome.dual_candidate = dual_value(build.controls, config.x0, batch,
                                            config.prefs, config.threads,
                                            &outcome.dual_per_path);

        if (config.backend == CondExpBackend::both && !result.cross_validation) {
            result.cross_validation = cross_validate(approx, batch, calib.eta, 50,
                                                     config.inner_paths, config.seed,
                                                     config.threads);
        }
        result.outcomes.push_back(std::move(outcome));
    }

    // Smallest upper bound across the candidate dual values ties the gap of
    // every approximation to the same certificate.
    result.selected = 0;
    for (std::size_t i = 1; i < result.outcomes.size(); ++i)
        if (result.outcomes[i].dual_candidate.value <
            result.outcomes[result.selected].dual_candidate.value)
            result.selected = i;

    const ApproxOutcome& sel = result.outcomes[result.selected];
    for (const ApproxOutcome& outcome : result.outcomes) {
        WelfareReport report;
        report.primal = outcome.primal.value;
        report.se_primal = outcome.primal.std_error;
        report.dual = sel.dual_candidate.value;
        report.se_dual = sel.dual_candidate.std_error;
        report.eta_star = outcome.eta_star;
        report.eta_prime = sel.eta_prime_candidate;
        report.gap = duality_gap(report.primal, report.dual);
        report.loss = welfare_loss(report.gap, report.eta_prime, config.x0);
        std::vector<double> diff(outcome.primal_per_path.size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = sel.dual_per_path[i] - outcome.primal_per_path[i];
        report.se_gap = mean_std_error(diff).std_error;
        result.reports.push_back(report);
    }

    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return result;
}

std::string run_report_json(const RunResult& result) {
    nlohmann::json j;
    nlohmann::json cfg;
    const ExperimentConfig& c = result.config;
    cfg["r"] = c.market.r;
    cfg["mu"] = c.market.mu;
    cfg["sigma"] = c.market.sigma;
    cfg["gamma"] = c.prefs.gamma;
    cfg["delta"] = c.prefs.delta;
    cfg["alpha"] = c.habit.alpha;
    cfg["beta"] = c.habit.beta;
    cfg["x0"] = c.x0;
    cfg["T"] = c.grid.horizon;
    cfg["n_steps"] = c.grid.n_steps;
    cfg["n_paths"] = c.n_paths;
    cfg["seed"] = c.seed;
    cfg["approximation"] = to_string(c.approximation);
    cfg["backend"] = to_string(c.backend);
    cfg["inner_paths"] = c.inner_paths;
    j["config"] = cfg;
    j["seed"] = c.seed;

    nlohmann::json results = nlohmann::json::array();
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
        const ApproxOutcome& o = result.outcomes[i];
        const WelfareReport& r = result.reports[i];
        nlohmann::json row;
        row["approximation"] = to_string(o.kind);
        row["eta_star"] = o.eta_star;
        row["budget_residual"] = o.budget_residual;
        row["J"] = r.primal;
        row["se_J"] = r.se_primal;
        row["V_candidate"] = o.dual_candidate.value;
        row["se_V_candidate"] = o.dual_candidate.std_error;
        row["eta_prime_candidate"] = o.eta_prime_candidate;
        row["V"] = r.dual;
        row["se_V"] = r.se_dual;
        row["eta_prime"] = r.eta_prime;
        row["D"] = r.gap;
        row["se_D"] = r.se_gap;
        row["C_percent"] = 100.0 * r.loss;
        results.push_back(row);
    }
    j["results"] = results;
    j["selected_upper_bound"] = to_string(result.outcomes[result.selected].kind);
    if (result.cross_validation) {
        nlohmann::json cv;
        cv["nodes"] = result.cross_validation->nodes;
        cv["outside_three_se"] = result.cross_validation->outside_three_se;
        cv["max_abs_z"] = result.cross_validation->max_abs_z;
        j["cross_validation"] = cv;
    }
    return j.dump(2) + "\n";
}

std::vector<Table1Row> table1_rows(const ExperimentConfig& base) {
    base.validate();
    struct Sweep {
        const char* name;
        std::vector<double> values;
    };
    const std::vector<Sweep> sweeps = {{"gamma", {6.0, 10.0, 14.0}},
                                       {"x0", {10.0, 20.0, 30.0}},
                                       {"alpha_beta", {0.01, 0.1, 0.2}},
                                       {"T", {1.0, 10.0, 20.0}}};
    std::vector<Table1Row> rows;
    for (const auto& sweep : sweeps) {
        for (double value : sweep.values) {
            ExperimentConfig cell = base;
            cell.approximation = ApproxSelection::both;
            if (sweep.name == std::string("gamma")) cell.prefs.gamma = value;
            else if (sweep.name == std::string("x0")) cell.x0 = value;
            else if (sweep.name == std::string("alpha_beta")) {
                cell.habit.alpha = value;
                cell.habit.beta = value;
            } else {
                cell.grid.horizon = value;
            }
            const RunResult run = run_experiment(cell);
            for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
                Table1Row row;
                row.sweep_param = sweep.name;
                row.sweep_value = value;
                row.kind = run.outcomes[i].kind;
                row.report = run.reports[i];
                row.seed = cell.seed;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::string table1_csv(const std::vector<Table1Row>& rows) {
    std::ostringstream out;
    out << "sweep_param,sweep_value,approx,J,V,D,C_percent,se_J,se_V,eta_star,"
           "eta_prime,seed\r\n";
    for (const auto& row : rows) {
        out << row.sweep_param << ',' << format_csv(row.sweep_value) << ','
            << to_string(row.kind) << ',' << format_csv(row.report.primal) << ','
            << format_csv(row.report.dual) << ',' << format_csv(row.report.gap) << ','
            << format_percent(row.report.loss) << ','
            << format_csv(row.report.se_primal) << ','
            << format_csv(row.report.se_dual) << ','
            << format_csv(row.report.eta_star) << ','
            << format_csv(row.report.eta_prime) << ',' << row.seed << "\r\n";
    }
    return out.str();
}

std::string plot_csv(const ExperimentConfig& config,
                     const std::vector<std::string>& variables) {
    config.validate();
    std::ostringstream out;
    out << "t,quantile,variable,value\r\n";
    if (variables.empty()) return out.str();
    for (const auto& name : variables)
        if (name != "chat" && name != "h" && name != "cprime" && name != "psi")
            throw ConfigError("plot: unknown variable '" + name + "'");

    const PathBatch base_batch = simulate_paths(config.market, config.grid,
                                                config.n_paths, config.seed,
                                                config.threads);
    std::vector<ApproxKind> kinds;
    if (config.approximation != ApproxSelection::dual) kinds.push_back(ApproxKind::bbl);
    if (config.approximation != ApproxSelection::bbl) kinds.push_back(ApproxKind::dual);

    const std::vector<double> quantiles = {0.05, 0.25, 0.5, 0.75, 0.95};
    const std::size_t n_points = config.grid.n_points();

    for (ApproxKind kind : kinds) {
        const Approximation approx(kind, config.model(), config.grid);
        PathBatch batch = base_batch;
        const auto calib = approx.calibrate(batch, config.x0, config.threads);
        const auto build = build_dual_controls(approx, batch, calib.eta, config.x0,
                                               CondExpBackend::analytic,
                                               config.inner_paths, config.seed,
                                               config.threads);
        for (const auto& name : variables) {
            for (std::size_t k = 0; k < n_points; ++k) {
                std::vector<double> column(batch.n_paths);
                for (std::size_t i = 0; i < batch.n_paths; ++i) {
                    if (name == "chat") column[i] = std::exp(batch.log_ratio(i, k));
                    else if (name == "h") column[i] = std::exp(batch.log_habit(i, k));
                    else if (name == "cprime")
                        column[i] = std::exp(batch.log_ratio(i, k) +
                                             batch.log_habit(i, k));
                    else column[i] = build.controls.psi(i, k);
                }
                std::sort(column.begin(), column.end());
                for (double p : quantiles) {
                    const double pos = p * static_cast<double>(column.size() - 1);
                    const std::size_t lo = static_cast<std::size_t>(pos);
                    const std::size_t hi = std::min(lo + 1, column.size() - 1);
                    const double frac = pos - static_cast<double>(lo);
                    const double value = (1.0 - frac) * column[lo] + frac * column[hi];
                    out << format_csv(config.grid.time(k)) << ',' << format_csv(p)
                        << ',' << to_string(kind) << '.' << name << ','
                        << format_csv(value) << "\r\n";
                }
            }
        }
    }
    return out.str();
}

}  // namespace habsim
