#pragma once

#include <optional>
#include <vector>

#include "fedsim/attacks.hpp"
#include "fedsim/data.hpp"
#include "fedsim/defenses.hpp"
#include "fedsim/eval.hpp"
#include "fedsim/model.hpp"
#include "fedsim/update.hpp"

namespace fedsim {

struct ServerState {
    GlobalModel model;
    Eigen::MatrixXd adam_m;  // first moment, M x d
    Eigen::MatrixXd adam_v;  // second moment, M x d
    long step = 0;
    double eta = 2e-3;

    static ServerState init(GlobalModel model, double eta);
};

// Standard Adam with bias correction on the aggregated item gradient.
void adam_apply(ServerState& server, const Eigen::MatrixXd& aggregate_grad,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct RoundReport {
    int round = 0;
    int sampled = 0;
    int accepted = 0;
    int filtered = 0;
    int malicious_sampled = 0;
    int malicious_filtered = 0;
    bool attack_active = false;
    double attack_loss = 0.0;
    int attack_k = 0;
    std::vector<double> uniformity;  // d_i per sampled client (UNION only)
    std::vector<int> sampled_clients;  // ascending client id
    std::vector<int> dropped_clients;  // ascending client id
    bool update_applied = false;
    bool evaluated = false;
    MetricResult val_metrics;
    MetricResult test_metrics;
    double duration_ms = 0.0;
};

struct TrainConfig {
    int rounds = 300;
    int clients_per_round = 50;
    int eval_interval = 50;
    int metric_k = 5;
    std::uint64_t seed = 0;
    int dim = 64;
    double eta = 2e-3;
    double l2_coeff = 1e-5;
    int num_negatives = 1;
    double cl_alpha = 1.0;
    int cl_negatives = 15;
    double malicious_percent = 0.0;  // m%, in [0, 100)
    AttackKind attack = AttackKind::none;
    AttackParams attack_params;
    DefenseParams defense;
    bool select_best_validation = true;
};

struct TrainResult {
    GlobalModel model;  // best-validation checkpoint (or final)
    MetricResult validation_metrics;
    MetricResult test_metrics;
    std::vector<RoundReport> history;
};

// Owns the whole simulated federation: server state, per-user local models,
// the fixed malicious-client set, and the attacker's controller state.
class Trainer {
  public:
    Trainer(const InteractionDataset& dataset, TrainConfig config);

    RoundReport run_round(int round);
    TrainResult train();

    const ServerState& server() const { return server_; }
    ServerState& server() { return server_; }
    const std::vector<UserModel>& user_models() const { return user_models_; }
    const std::vector<bool>& malicious() const { return malicious_; }
    const AttackState& attack_state() const { return attack_state_; }
    const TrainConfig& config() const { return config_; }
    bool cl_enabled() const;

  private:
    std::vector<int> sample_clients(int round);
    std::vector<ClientUpdate> build_updates(int round, const std::vector<int>& sampled,
                                            RoundReport& report);

    const InteractionDataset& dataset_;
    TrainConfig config_;
    ServerState server_;
    std::vector<UserModel> user_models_;
    std::vector<bool> malicious_;
    AttackState attack_state_;
};

}  // namespace fedsim
