#include "fedsim/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

// rng stream tags; client substreams are keyed by client id * kChannels + channel
constexpr std::uint64_t kTagSample = 1;
constexpr std::uint64_t kTagDefense = 2;
constexpr std::uint64_t kTagAttackShared = 3;
constexpr std::uint64_t kChannels = 4;
constexpr std::uint64_t kTagClientBase = 16;

Rng client_stream(std::uint64_t seed, int round, int client, int channel) {
    return make_stream(seed, static_cast<std::uint64_t>(round),
                       kTagClientBase + static_cast<std::uint64_t>(client) * kChannels + channel);
}

}  // namespace

ServerState ServerState::init(GlobalModel model, double eta) {
    ServerState s;
    s.adam_m = Eigen::MatrixXd::Zero(model.num_items(), model.dim());
    s.adam_v = Eigen::MatrixXd::Zero(model.num_items(), model.dim());
    s.model = std::move(model);
    s.eta = eta;
    return s;
}

void adam_apply(ServerState& server, const Eigen::MatrixXd& grad, double beta1, double beta2,
                double eps) {
    if (grad.rows() != server.model.item_embeddings.rows() ||
        grad.cols() != server.model.item_embeddings.cols()) {
        throw ConfigError("adam_apply: gradient shape mismatch");
    }
    if (!grad.allFinite()) {
        throw NumericError("adam_apply: non-finite gradient");
    }
    server.step += 1;
    server.adam_m = beta1 * server.adam_m + (1.0 - beta1) * grad;
    server.adam_v = beta2 * server.adam_v + (1.0 - beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(server.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(server.step));
    Eigen::ArrayXXd m_hat = server.adam_m.array() / bc1;
    Eigen::ArrayXXd v_hat = server.adam_v.array() / bc2;
    server.model.item_embeddings.array() -= server.eta * m_hat / (v_hat.sqrt() + eps);
}

Trainer::Trainer(const InteractionDataset& dataset, TrainConfig config)
    : dataset_(dataset), config_(std::move(config)) {
    if (config_.clients_per_round > dataset_.num_users) {
        throw ConfigError("clients_per_round exceeds number of users");
    }
    if (config_.malicious_percent < 0.0 || config_.malicious_percent >= 100.0) {
        throw ConfigError("malicious_percent must be in [0, 100)");
    }
    config_.defense.virtual_eta = config_.eta;

    Rng init_rng = make_stream(config_.seed, 0xA11CE);
    server_ = ServerState::init(
        GlobalModel::init_uniform(dataset_.num_items, config_.dim, init_rng), config_.eta);
    user_models_.reserve(dataset_.num_users);
    for (int u = 0; u < dataset_.num_users; ++u) {
        user_models_.push_back(UserModel::init_uniform(config_.dim, init_rng));
    }

    malicious_.assign(dataset_.num_users, false);
    if (config_.attack != AttackKind::none && config_.malicious_percent > 0.0) {
        const int count = static_cast<int>(
            std::ceil(config_.malicious_percent / 100.0 * dataset_.num_users));
        std::vector<int> ids(dataset_.num_users);
        std::iota(ids.begin(), ids.end(), 0);
        Rng mal_rng = make_stream(config_.seed, 0xBAD);
        for (int i = 0; i < count; ++i) {
            int j = uniform_int(mal_rng, i, dataset_.num_users - 1);
            std::swap(ids[i], ids[j]);
            malicious_[ids[i]] = true;
        }
    }

    attack_state_ = AttackState::from_params(config_.attack_params);
}

bool Trainer::cl_enabled() const { return config_.defense.filter == FilterKind::union_filter; }

std::vector<int> Trainer::sample_clients(int round) {
    Rng rng = make_stream(config_.seed, static_cast<std::uint64_t>(round), kTagSample);
    std::vector<int> ids(dataset_.num_users);
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < config_.clients_per_round; ++i) {
        int j = uniform_int(rng, i, dataset_.num_users - 1);
        std::swap(ids[i], ids[j]);
    }
    ids.resize(config_.clients_per_round);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<ClientUpdate> Trainer::build_updates(int round, const std::vector<int>& sampled,
                                                 RoundReport& report) {
    const GlobalModel& snapshot = server_.model;  // constant within the round
    std::vector<ClientUpdate> updates;
    updates.reserve(sampled.size());

    std::vector<int> malicious_sampled;
    for (int uid : sampled) {
        if (malicious_[uid]) malicious_sampled.push_back(uid);
    }
    report.malicious_sampled = static_cast<int>(malicious_sampled.size());

    // Benign-style local pass for one client: BPR over the train positives,
    // plus the CL task when the UNION defense is active.
    auto benign_gradient = [&](int uid, Rng& rng) {
        auto batch = sample_batch(dataset_, uid, config_.num_negatives, rng);
        return combined_client_gradient(user_models_[uid], snapshot, batch, cl_enabled(),
                                        config_.cl_alpha, config_.l2_coeff, config_.cl_negatives,
                                        rng);
    };
    auto apply_user_sgd = [&](int uid, const Eigen::VectorXd& g_user) {
        user_models_[uid].embedding -= config_.eta * g_user;
    };

    const bool attack_active = config_.attack != AttackKind::none && !malicious_sampled.empty();
    const bool cluster_attack = config_.attack == AttackKind::cluster_attack ||
                                config_.attack == AttackKind::cluster_attack_cl;

    // The attacker's shared per-round clustering (cohort coordination).
    std::optional<Clustering> shared_clustering;
    if (attack_active && cluster_attack) {
        Rng rng = make_stream(config_.seed, static_cast<std::uint64_t>(round), kTagAttackShared);
        const int k = std::min(attack_state_.k, snapshot.num_items());
        shared_clustering = kmeans(snapshot.item_embeddings, k, rng);
        report.attack_loss = shared_clustering->within_variance;
        report.attack_k = k;
        report.attack_active = true;
    }

    // Cohort gradients for statistics-based model poisoning.
    std::vector<Eigen::MatrixXd> cohort_grads;
    if (attack_active && (config_.attack == AttackKind::gaussian ||
                          config_.attack == AttackKind::lie || config_.attack == AttackKind::fang)) {
        for (int uid : malicious_sampled) {
            Rng rng = client_stream(config_.seed, round, uid, 1);
            cohort_grads.push_back(benign_gradient(uid, rng).item_grad);
        }
    }
    CohortStats cohort_stats;
    if (!cohort_grads.empty()) cohort_stats = cohort_entrywise_stats(cohort_grads);

    for (int uid : sampled) {
        Rng rng = client_stream(config_.seed, round, uid, 0);
        if (!malicious_[uid] || config_.attack == AttackKind::none) {
            LocalGradient g = benign_gradient(uid, rng);
            apply_user_sgd(uid, g.user_grad);
            updates.push_back({uid, std::move(g.item_grad), malicious_[uid]});
            continue;
        }

        // Every malicious client still trains its own user embedding with the
        // normal recommendation gradient.
        auto normal_batch = sample_batch(dataset_, uid, config_.num_negatives, rng);
        LocalGradient normal = LocalGradient::zeros(snapshot.num_items(), snapshot.dim());
        for (const auto& ex : normal_batch) {
            LocalGradient g = bpr_gradient(user_models_[uid], snapshot, ex, config_.l2_coeff);
            normal.item_grad += g.item_grad;
            normal.user_grad += g.user_grad;
            normal.touched_items.insert(normal.touched_items.end(), g.touched_items.begin(),
                                        g.touched_items.end());
        }
        normal.finalize_touched();

        Eigen::MatrixXd upload;
        switch (config_.attack) {
            case AttackKind::label_flip: {
                auto flipped = label_flip_examples(normal_batch);
                LocalGradient g = LocalGradient::zeros(snapshot.num_items(), snapshot.dim());
                for (const auto& ex : flipped) {
                    LocalGradient part =
                        bpr_gradient(user_models_[uid], snapshot, ex, config_.l2_coeff);
                    g.item_grad += part.item_grad;
                }
                upload = std::move(g.item_grad);
                break;
            }
            case AttackKind::fed_attack: {
                auto adversarial = fed_attack_examples(user_models_[uid], snapshot, dataset_, uid,
                                                       config_.num_negatives);
                LocalGradient g = LocalGradient::zeros(snapshot.num_items(), snapshot.dim());
                for (const auto& ex : adversarial) {
                    LocalGradient part =
                        bpr_gradient(user_models_[uid], snapshot, ex, config_.l2_coeff);
                    g.item_grad += part.item_grad;
                }
                upload = std::move(g.item_grad);
                break;
            }
            case AttackKind::gaussian:
                upload = gaussian_update(cohort_stats, rng);
                break;
            case AttackKind::lie:
                upload = lie_update(cohort_stats, config_.attack_params.lie_z);
                break;
            case AttackKind::fang:
                upload = fang_update(cohort_stats, config_.attack_params.fang_gamma);
                break;
            case AttackKind::cluster_attack:
            case AttackKind::cluster_attack_cl: {
                Eigen::MatrixXd raw = cluster_attack_raw_gradient(snapshot, *shared_clustering);
                if (config_.attack == AttackKind::cluster_attack_cl) {
                    LocalGradient cl = infonce_gradient(dataset_.train[uid], snapshot,
                                                        config_.attack_params.cl_negatives, rng);
                    raw += config_.attack_params.cl_alpha * cl.item_grad;
                }
                NormStats stats = touched_row_norm_stats(normal);
                upload = clip_rows_to_norm_bounds(raw, stats, rng);
                break;
            }
            default:
                throw ConfigError("unhandled attack kind");
        }
        apply_user_sgd(uid, normal.user_grad);
        updates.push_back({uid, std::move(upload), true});
    }
    return updates;
}

RoundReport Trainer::run_round(int round) {
    const auto start = std::chrono::steady_clock::now();
    RoundReport report;
    report.round = round;
    report.attack_k = attack_state_.k;

    std::vector<int> sampled = sample_clients(round);
    report.sampled = static_cast<int>(sampled.size());
    report.sampled_clients = sampled;

    std::vector<ClientUpdate> updates = build_updates(round, sampled, report);

    Rng defense_rng = make_stream(config_.seed, static_cast<std::uint64_t>(round), kTagDefense);
    DefenseOutcome outcome = run_defense(updates, server_.model, config_.defense, defense_rng);

    report.accepted = static_cast<int>(outcome.filter.kept.size());
    report.filtered = report.sampled - report.accepted;
    report.uniformity = outcome.filter.uniformity;
    for (int i : outcome.filter.dropped) {
        report.dropped_clients.push_back(updates[i].client_id);
        if (updates[i].is_malicious) ++report.malicious_filtered;
    }

    if (outcome.applied) {
        adam_apply(server_, outcome.aggregate);
        report.update_applied = true;
    }

    // Adaptive clustering feedback, once per round of attack.
    if (report.attack_active) {
        adaptive_update_k(attack_state_, report.attack_loss);
    }

    report.duration_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    return report;
}

TrainResult Trainer::train() {
    TrainResult result;
    std::vector<bool> benign(dataset_.num_users);
    for (int u = 0; u < dataset_.num_users; ++u) benign[u] = !malicious_[u];

    GlobalModel best_model = server_.model;
    double best_val_hr = -1.0;

    for (int round = 1; round <= config_.rounds; ++round) {
        RoundReport report = run_round(round);
        if (config_.eval_interval > 0 &&
            (round % config_.eval_interval == 0 || round == config_.rounds)) {
            report.evaluated = true;
            report.val_metrics = evaluate(server_.model, user_models_, dataset_, config_.metric_k,
                                          EvalSplit::validation, benign);
            report.test_metrics = evaluate(server_.model, user_models_, dataset_, config_.metric_k,
                                           EvalSplit::test, benign);
            if (report.val_metrics.hr_at_k > best_val_hr) {
                best_val_hr = report.val_metrics.hr_at_k;
                best_model = server_.model;
            }
        }
        result.history.push_back(std::move(report));
    }

    result.model = (config_.select_best_validation && best_val_hr >= 0.0) ? best_model
                                                                          : server_.model;
    result.validation_metrics = evaluate(result.model, user_models_, dataset_, config_.metric_k,
                                         EvalSplit::validation, benign);
    result.test_metrics =
        evaluate(result.model, user_models_, dataset_, config_.metric_k, EvalSplit::test, benign);
    return result;
}

}  // namespace fedsim
