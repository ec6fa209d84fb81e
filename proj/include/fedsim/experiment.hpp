#pragma once

#include <string>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/federation.hpp"

namespace fedsim {

struct ExperimentConfig {
    bool use_synthetic = true;
    SyntheticParams synthetic;
    std::string ml1m_path;
    TrainConfig train;  // per-run template; seed comes from `seeds`
    std::vector<std::uint64_t> seeds = {1};
    std::string output_dir = "out";
};

ExperimentConfig load_experiment_config(const std::string& path);

struct SeedSummary {
    std::uint64_t seed = 0;
    MetricResult validation;
    MetricResult test;
};

struct ExperimentSummary {
    std::vector<SeedSummary> per_seed;
    double mean_hr = 0.0, std_hr = 0.0;
    double mean_ndcg = 0.0, std_ndcg = 0.0;
};

// Runs every seed and writes rounds.jsonl, metrics.csv and summary.json
// into the output directory. Byte-identical outputs for identical inputs.
ExperimentSummary run_experiment(const ExperimentConfig& config);

// (baseline - attacked) / baseline * 100.
double relative_degradation_percent(double baseline, double attacked);

}  // namespace fedsim
