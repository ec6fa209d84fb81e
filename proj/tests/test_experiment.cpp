#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/experiment.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("fedsim_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    fs::path p = dir / "config.json";
    std::ofstream out(p);
    out << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmallConfig = R"({
  "dataset": {"type": "synthetic", "num_users": 25, "num_items": 30,
              "num_latent_groups": 3, "interactions_per_user": 8, "seed": 11},
  "model": {"dim": 8, "eta": 0.05},
  "federation": {"rounds": 20, "clients_per_round": 8, "eval_interval": 10, "seeds": [1, 2]},
  "attack": {"name": "cluster_attack", "malicious_percent": 10.0, "threshold_r": 5},
  "defense": {"filter": "none", "aggregate": "mean"},
  "output_dir": "OUT"
})";

std::string small_config_with_out(const fs::path& out_dir) {
    std::string body = kSmallConfig;
    body.replace(body.find("OUT"), 3, out_dir.generic_string());
    return body;
}

}  // namespace

TEST_CASE("load_experiment_config: parses every section") {
    fs::path dir = scratch_dir("load");
    fs::path cfg_path = write_config(dir, small_config_with_out(dir / "run"));
    ExperimentConfig cfg = load_experiment_config(cfg_path.string());

    CHECK(cfg.use_synthetic);
    CHECK(cfg.synthetic.num_users == 25);
    CHECK(cfg.synthetic.num_items == 30);
    CHECK(cfg.train.dim == 8);
    CHECK(cfg.train.eta == doctest::Approx(0.05));
    CHECK(cfg.train.rounds == 20);
    CHECK(cfg.train.attack == AttackKind::cluster_attack);
    CHECK(cfg.train.malicious_percent == doctest::Approx(10.0));
    CHECK(cfg.train.attack_params.threshold_r == 5);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
    fs::remove_all(dir);
}

TEST_CASE("load_experiment_config: rejects bad input") {
    fs::path dir = scratch_dir("badcfg");
    CHECK_THROWS_AS(load_experiment_config((dir / "missing.json").string()), ConfigError);

    fs::path bad_json = write_config(dir, "{ not json");
    CHECK_THROWS_AS(load_experiment_config(bad_json.string()), ConfigError);

    fs::path bad_type = write_config(dir, R"({"dataset": {"type": "csv"}})");
    CHECK_THROWS_AS(load_experiment_config(bad_type.string()), ConfigError);

    fs::path bad_pct = write_config(dir, R"({
      "dataset": {"type": "synthetic", "num_users": 5, "num_items": 5,
                  "num_latent_groups": 1, "interactions_per_user": 3},
      "attack": {"name": "lie", "malicious_percent": 150.0}})");
    CHECK_THROWS_AS(load_experiment_config(bad_pct.string()), ConfigError);

    fs::path bad_attack = write_config(dir, R"({
      "dataset": {"type": "synthetic", "num_users": 5, "num_items": 5,
                  "num_latent_groups": 1, "interactions_per_user": 3},
      "attack": {"name": "meteor"}})");
    CHECK_THROWS_AS(load_experiment_config(bad_attack.string()), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("relative degradation arithmetic") {
    CHECK(relative_degradation_percent(0.2, 0.1) == doctest::Approx(50.0));
    CHECK(relative_degradation_percent(0.2, 0.25) == doctest::Approx(-25.0));
    // reference pairs with hand-computed degradation percentages
    CHECK(relative_degradation_percent(0.03549, 0.02451) == doctest::Approx(30.94).epsilon(1e-3));
    CHECK(relative_degradation_percent(0.03549, 0.03358) == doctest::Approx(5.38).epsilon(1e-2));
    CHECK_THROWS_AS(relative_degradation_percent(0.0, 0.1), ConfigError);
}

TEST_CASE("run_experiment: writes all artifacts with sane contents") {
    fs::path dir = scratch_dir("artifacts");
    fs::path out_dir = dir / "run";
    fs::path cfg_path = write_config(dir, small_config_with_out(out_dir));
    ExperimentConfig cfg = load_experiment_config(cfg_path.string());
    ExperimentSummary summary = run_experiment(cfg);

    CHECK(summary.per_seed.size() == 2);
    CHECK(fs::exists(out_dir / "rounds.jsonl"));
    CHECK(fs::exists(out_dir / "metrics.csv"));
    CHECK(fs::exists(out_dir / "summary.json"));

    std::string csv = slurp(out_dir / "metrics.csv");
    CHECK(csv.rfind("seed,round,hr_at_k,ndcg_at_k,attack_loss,filtered_count\n", 0) == 0);
    // 20 rounds / eval every 10 = 2 eval rows per seed
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2);

    // 20 rounds per seed in the jsonl log
    std::string jsonl = slurp(out_dir / "rounds.jsonl");
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 2 * 20);
    fs::remove_all(dir);
}

TEST_CASE("run_experiment: metrics.csv is byte-identical across reruns") {
    fs::path dir = scratch_dir("determinism");
    fs::path out_a = dir / "a";
    fs::path out_b = dir / "b";
    fs::path cfg_a = write_config(dir, small_config_with_out(out_a));
    ExperimentConfig cfg = load_experiment_config(cfg_a.string());
    run_experiment(cfg);
    cfg.output_dir = out_b.string();
    run_experiment(cfg);

    CHECK(slurp(out_a / "metrics.csv") == slurp(out_b / "metrics.csv"));
    CHECK(slurp(out_a / "rounds.jsonl") == slurp(out_b / "rounds.jsonl"));
    CHECK(slurp(out_a / "summary.json") == slurp(out_b / "summary.json"));
    fs::remove_all(dir);
}
