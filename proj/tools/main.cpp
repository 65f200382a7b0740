#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "habsim/errors.hpp"
#include "habsim/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasibleDual = 3;
constexpr int kExitCalibration = 4;

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_path;
    long long seed = -1;
    int threads = -1;
    std::string backend;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--config", opt.config_path, "Flat key=value config file");
    cmd->add_option("--set", opt.overrides, "Override KEY=VALUE (repeatable)");
    cmd->add_option("--out", opt.out_path, "Output path (default: stdout)");
    cmd->add_option("--seed", opt.seed, "Random seed");
    cmd->add_option("--threads", opt.threads, "Worker threads (0 = hardware)");
    cmd->add_option("--backend", opt.backend,
                    "Conditional-expectation backend: analytic, nested or both")
        ->check(CLI::IsMember({"analytic", "nested", "both"}));
}

habsim::ExperimentConfig load_config(const CommonOptions& opt) {
    habsim::ExperimentConfig config;
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw habsim::ConfigError("cannot open config file " + opt.config_path);
        std::ostringstream text;
        text << in.rdbuf();
        config = habsim::parse_config_text(text.str());
    }
    for (const auto& kv : opt.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw habsim::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
        habsim::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opt.seed >= 0) config.seed = static_cast<std::uint64_t>(opt.seed);
    if (opt.threads >= 0) config.threads = opt.threads;
    if (!opt.backend.empty())
        habsim::apply_override(config, "backend", opt.backend);
    config.validate();
    return config;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw habsim::ConfigError("cannot open output path " + path);
    out << content;
    if (!out) throw habsim::ConfigError("failed writing output path " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo welfare-loss certification for consumption "
                 "approximations under multiplicative habit formation"};
    app.require_subcommand(1);

    CommonOptions run_opt, table_opt, plot_opt;
    std::string plot_vars = "chat,h,cprime,psi";

    CLI::App* run_cmd = app.add_subcommand(
        "run", "Single certification run; writes a JSON report");
    add_common(run_cmd, run_opt);

    CLI::App* table_cmd = app.add_subcommand(
        "table1", "Welfare-loss sweep over gamma, X0, alpha=beta and T; writes CSV");
    add_common(table_cmd, table_opt);

    CLI::App* plot_cmd = app.add_subcommand(
        "plot", "Per-time quantile paths of chat, h, c' and psi'; writes CSV");
    add_common(plot_cmd, plot_opt);
    plot_cmd->add_option("--vars", plot_vars,
                         "Comma-separated subset of chat,h,cprime,psi (empty for "
                         "header-only output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run_cmd->parsed()) {
            const auto config = load_config(run_opt);
            const auto result = habsim::run_experiment(config);
            write_output(run_opt.out_path, habsim::run_report_json(result));
            std::fprintf(stderr, "run completed in %.2f s\n", result.runtime_seconds);
        } else if (table_cmd->parsed()) {
            const auto config = load_config(table_opt);
            const auto rows = habsim::table1_rows(config);
            write_output(table_opt.out_path, habsim::table1_csv(rows));
        } else {
            const auto config = load_config(plot_opt);
            std::vector<std::string> vars;
            std::stringstream ss(plot_vars);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) vars.push_back(item);
            write_output(plot_opt.out_path, habsim::plot_csv(config, vars));
        }
    } catch (const habsim::InfeasibleDualError& e) {
        std::fprintf(stderr, "error: %s (offending fraction %.3g)\n", e.what(),
                     e.offending_fraction);
        return kExitInfeasibleDual;
    } catch (const habsim::CalibrationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitCalibration;
    } catch (const habsim::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}
