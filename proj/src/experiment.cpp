#include "fedsim/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fedsim/errors.hpp"

namespace fedsim {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (j.contains(key)) return j.at(key).get<T>();
    return fallback;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    try {
        const json& ds = j.at("dataset");
        const std::string type = ds.at("type").get<std::string>();
        if (type == "synthetic") {
            cfg.use_synthetic = true;
            cfg.synthetic.num_users = ds.at("num_users").get<int>();
            cfg.synthetic.num_items = ds.at("num_items").get<int>();
            cfg.synthetic.num_latent_groups = ds.at("num_latent_groups").get<int>();
            cfg.synthetic.interactions_per_user = ds.at("interactions_per_user").get<int>();
            cfg.synthetic.seed = get_or<std::uint64_t>(ds, "seed", 7);
        } else if (type == "ml1m") {
            cfg.use_synthetic = false;
            cfg.ml1m_path = ds.at("path").get<std::string>();
        } else {
            throw ConfigError("dataset.type must be 'synthetic' or 'ml1m'");
        }

        TrainConfig& t = cfg.train;
        if (j.contains("model")) {
            const json& m = j["model"];
            t.dim = get_or(m, "dim", t.dim);
            t.eta = get_or(m, "eta", t.eta);
            t.l2_coeff = get_or(m, "l2", t.l2_coeff);
            t.num_negatives = get_or(m, "num_negatives", t.num_negatives);
        }
        if (j.contains("federation")) {
            const json& f = j["federation"];
            t.rounds = get_or(f, "rounds", t.rounds);
            t.clients_per_round = get_or(f, "clients_per_round", t.clients_per_round);
            t.eval_interval = get_or(f, "eval_interval", t.eval_interval);
            t.metric_k = get_or(f, "metric_k", t.metric_k);
            t.select_best_validation = get_or(f, "select_best_validation", t.select_best_validation);
            if (f.contains("seeds")) cfg.seeds = f["seeds"].get<std::vector<std::uint64_t>>();
        }
        if (j.contains("attack")) {
            const json& a = j["attack"];
            t.attack = attack_kind_from_string(get_or<std::string>(a, "name", "none"));
            t.malicious_percent = get_or(a, "malicious_percent", 0.0);
            AttackParams& p = t.attack_params;
            p.k_init = get_or(a, "k_init", p.k_init);
            p.k_min = get_or(a, "k_min", p.k_min);
            p.k_max = get_or(a, "k_max", p.k_max);
            p.threshold_r = get_or(a, "threshold_r", p.threshold_r);
            p.ema_decay = get_or(a, "ema_decay", p.ema_decay);
            p.lie_z = get_or(a, "lie_z", p.lie_z);
            p.fang_gamma = get_or(a, "fang_gamma", p.fang_gamma);
            p.cl_alpha = get_or(a, "cl_alpha", p.cl_alpha);
            p.cl_negatives = get_or(a, "cl_negatives", p.cl_negatives);
        }
        if (j.contains("defense")) {
            const json& d = j["defense"];
            DefenseParams p = defense_from_strings(get_or<std::string>(d, "filter", "none"),
                                                   get_or<std::string>(d, "aggregate", "mean"));
            p.trim_fraction = get_or(d, "trim_fraction", p.trim_fraction);
            p.krum_f = get_or(d, "krum_f", p.krum_f);
            p.multi_krum_c = get_or(d, "multi_krum_c", p.multi_krum_c);
            p.norm_tau = get_or(d, "norm_tau", p.norm_tau);
            p.uniformity_sample = get_or(d, "uniformity_sample", p.uniformity_sample);
            p.gap_reference_samples = get_or(d, "gap_reference_samples", p.gap_reference_samples);
            p.per_client_sample = get_or(d, "per_client_sample", p.per_client_sample);
            t.defense = p;
            t.cl_alpha = get_or(d, "cl_alpha", t.cl_alpha);
            t.cl_negatives = get_or(d, "cl_negatives", t.cl_negatives);
        }
        cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    if (cfg.seeds.empty()) throw ConfigError("federation.seeds must not be empty");
    if (cfg.train.malicious_percent < 0.0 || cfg.train.malicious_percent >= 100.0) {
        throw ConfigError("attack.malicious_percent must be in [0, 100)");
    }
    return cfg;
}

double relative_degradation_percent(double baseline, double attacked) {
    if (baseline == 0.0) throw ConfigError("degradation: baseline metric is zero");
    return (baseline - attacked) / baseline * 100.0;
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);

    InteractionDataset dataset = config.use_synthetic ? generate_synthetic(config.synthetic)
                                                      : load_ml1m(config.ml1m_path);

    std::ofstream jsonl(fs::path(config.output_dir) / "rounds.jsonl");
    std::ofstream csv(fs::path(config.output_dir) / "metrics.csv");
    csv << "seed,round,hr_at_k,ndcg_at_k,attack_loss,filtered_count\n";

    ExperimentSummary summary;
    for (std::uint64_t seed : config.seeds) {
        TrainConfig tc = config.train;
        tc.seed = seed;
        Trainer trainer(dataset, tc);
        TrainResult result = trainer.train();

        for (const auto& r : result.history) {
            json row{
                {"seed", seed},
                {"round", r.round},
                {"sampled", r.sampled},
                {"accepted", r.accepted},
                {"filtered", r.filtered},
                {"malicious_sampled", r.malicious_sampled},
                {"malicious_filtered", r.malicious_filtered},
                {"update_applied", r.update_applied},
                {"dropped_clients", r.dropped_clients},
            };
            if (r.attack_active) {
                row["attack_loss"] = r.attack_loss;
                row["attack_k"] = r.attack_k;
            }
            if (!r.uniformity.empty()) row["uniformity"] = r.uniformity;
            if (r.evaluated) {
                row["val_hr"] = r.val_metrics.hr_at_k;
                row["val_ndcg"] = r.val_metrics.ndcg_at_k;
                row["test_hr"] = r.test_metrics.hr_at_k;
                row["test_ndcg"] = r.test_metrics.ndcg_at_k;
            }
            jsonl << row.dump() << "\n";

            if (r.evaluated) {
                csv << seed << ',' << r.round << ',' << fmt_double(r.test_metrics.hr_at_k) << ','
                    << fmt_double(r.test_metrics.ndcg_at_k) << ','
                    << (r.attack_active ? fmt_double(r.attack_loss) : "") << ',' << r.filtered
                    << "\n";
            }
        }

        SeedSummary s;
        s.seed = seed;
        s.validation = result.validation_metrics;
        s.test = result.test_metrics;
        summary.per_seed.push_back(s);
    }

    const int ns = static_cast<int>(summary.per_seed.size());
    for (const auto& s : summary.per_seed) {
        summary.mean_hr += s.test.hr_at_k;
        summary.mean_ndcg += s.test.ndcg_at_k;
    }
    summary.mean_hr /= ns;
    summary.mean_ndcg /= ns;
    for (const auto& s : summary.per_seed) {
        summary.std_hr += (s.test.hr_at_k - summary.mean_hr) * (s.test.hr_at_k - summary.mean_hr);
        summary.std_ndcg +=
            (s.test.ndcg_at_k - summary.mean_ndcg) * (s.test.ndcg_at_k - summary.mean_ndcg);
    }
    summary.std_hr = std::sqrt(summary.std_hr / ns);
    summary.std_ndcg = std::sqrt(summary.std_ndcg / ns);

    json out{{"metric_k", config.train.metric_k},
             {"num_seeds", ns},
             {"mean", {{"hr", summary.mean_hr}, {"ndcg", summary.mean_ndcg}}},
             {"std", {{"hr", summary.std_hr}, {"ndcg", summary.std_ndcg}}}};
    out["seeds"] = json::array();
    for (const auto& s : summary.per_seed) {
        out["seeds"].push_back({{"seed", s.seed},
                                {"val_hr", s.validation.hr_at_k},
                                {"val_ndcg", s.validation.ndcg_at_k},
                                {"test_hr", s.test.hr_at_k},
                                {"test_ndcg", s.test.ndcg_at_k}});
    }
    std::ofstream sj(fs::path(config.output_dir) / "summary.json");
    sj << out.dump(2) << "\n";
    return summary;
}

}  // namespace fedsim
