#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int cmd_run(const std::string& config_path, long long seed_override, const std::string& out_dir) {
    try {
        fedsim::ExperimentConfig cfg = fedsim::load_experiment_config(config_path);
        if (seed_override >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        fedsim::ExperimentSummary s = fedsim::run_experiment(cfg);
        std::printf("seeds=%zu mean_hr=%.6f std_hr=%.6f mean_ndcg=%.6f std_ndcg=%.6f\n",
                    s.per_seed.size(), s.mean_hr, s.std_hr, s.mean_ndcg, s.std_ndcg);
        return kExitOk;
    } catch (const fedsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fedsim::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fedsim::NumericError& e) {
        std::cerr << "numeric fault: " << e.what() << "\n";
        return kExitNumeric;
    }
}

double read_mean_hr(const std::string& summary_path) {
    std::ifstream in(summary_path);
    if (!in) throw fedsim::ConfigError("cannot open summary: " + summary_path);
    nlohmann::json j;
    in >> j;
    return j.at("mean").at("hr").get<double>();
}

int cmd_degradation(const std::string& baseline_path, const std::string& attacked_path) {
    try {
        const double base = read_mean_hr(baseline_path);
        const double atk = read_mean_hr(attacked_path);
        std::printf("hr_degradation_percent=%.4f\n",
                    fedsim::relative_degradation_percent(base, atk));
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated recommendation poisoning/defense simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed_override = -1;
    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("config", config_path, "experiment config file (JSON)")->required();
    run->add_option("--seed-override", seed_override, "run only this seed");
    run->add_option("--out", out_dir, "output directory override");

    std::string baseline_path, attacked_path;
    auto* deg = app.add_subcommand("degradation", "Relative HR degradation between two summaries");
    deg->add_option("baseline", baseline_path, "baseline summary.json")->required();
    deg->add_option("attacked", attacked_path, "attacked summary.json")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, seed_override, out_dir);
    return cmd_degradation(baseline_path, attacked_path);
}
