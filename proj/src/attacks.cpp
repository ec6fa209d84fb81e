#include "fedsim/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedsim/errors.hpp"

namespace fedsim {

AttackKind attack_kind_from_string(const std::string& name) {
    if (name == "none") return AttackKind::none;
    if (name == "label_flip") return AttackKind::label_flip;
    if (name == "fed_attack") return AttackKind::fed_attack;
    if (name == "gaussian") return AttackKind::gaussian;
    if (name == "lie") return AttackKind::lie;
    if (name == "fang") return AttackKind::fang;
    if (name == "cluster_attack") return AttackKind::cluster_attack;
    if (name == "cluster_attack_cl") return AttackKind::cluster_attack_cl;
    throw ConfigError("unknown attack: " + name);
}

bool is_model_poisoning(AttackKind kind) {
    switch (kind) {
        case AttackKind::gaussian:
        case AttackKind::lie:
        case AttackKind::fang:
        case AttackKind::cluster_attack:
        case AttackKind::cluster_attack_cl:
            return true;
        default:
            return false;
    }
}

void adaptive_update_k(AttackState& s, double new_attack_loss) {
    s.t += 1;
    s.ema_loss = s.ema_decay * s.ema_loss + (1.0 - s.ema_decay) * new_attack_loss;
    const double corrected = s.ema_loss / (1.0 - std::pow(s.ema_decay, s.t));

    if (s.t > 1 && s.has_prev) {
        if (corrected > s.prev_corrected) {
            s.n_inc += 1;
        } else {
            s.n_dec += 1;
        }
    }
    s.prev_corrected = corrected;
    s.has_prev = true;

    // On a K change the controller restarts from its init state, EMA included,
    // so the next adaptation epoch is not biased by the previous clustering.
    if (s.n_inc - s.n_dec >= s.threshold_r) {
        s.k = std::min(static_cast<int>(std::floor(s.k + std::sqrt(static_cast<double>(s.k_max - s.k)))),
                       s.k_max);
        s.n_inc = s.n_dec = s.t = 0;
        s.ema_loss = 0.0;
        s.has_prev = false;
    } else if (s.n_dec - s.n_inc >= s.threshold_r) {
        s.k = std::max(static_cast<int>(std::floor(s.k - std::sqrt(static_cast<double>(s.k - s.k_min)))),
                       s.k_min);
        s.n_inc = s.n_dec = s.t = 0;
        s.ema_loss = 0.0;
        s.has_prev = false;
    }
}

Eigen::MatrixXd cluster_attack_raw_gradient(const GlobalModel& model,
                                            const Clustering& clustering) {
    const auto& V = model.item_embeddings;
    Eigen::MatrixXd grad(V.rows(), V.cols());
    for (int i = 0; i < V.rows(); ++i) {
        grad.row(i) = 2.0 * (V.row(i) - clustering.centroids.row(clustering.assignments[i]));
    }
    return grad;
}

NormStats touched_row_norm_stats(const LocalGradient& grad) {
    // Untouched rows have norm 0 and would drag the mean toward a
    // degenerate clip bound, so only touched rows count.
    NormStats stats;
    const auto& touched = grad.touched_items;
    if (touched.empty()) return stats;
    std::vector<double> norms;
    norms.reserve(touched.size());
    for (int i : touched) norms.push_back(grad.item_grad.row(i).norm());
    double mean = 0.0;
    for (double v : norms) mean += v;
    mean /= static_cast<double>(norms.size());
    double var = 0.0;
    for (double v : norms) var += (v - mean) * (v - mean);
    var /= static_cast<double>(norms.size());
    stats.mean = mean;
    stats.stddev = std::sqrt(var);
    return stats;
}

Eigen::MatrixXd clip_rows_to_norm_bounds(const Eigen::MatrixXd& raw, const NormStats& stats,
                                         Rng& rng) {
    Eigen::MatrixXd clipped = raw;
    for (int i = 0; i < raw.rows(); ++i) {
        const double lambda = uniform_real(rng, 0.0, 3.0);
        const double bound = stats.mean + lambda * stats.stddev;
        const double norm = raw.row(i).norm();
        const double scale = std::max(1.0, bound > 0.0 ? norm / bound
                                                       : std::numeric_limits<double>::infinity());
        if (scale > 1.0) {
            clipped.row(i) = bound > 0.0 ? (raw.row(i) / scale).eval()
                                         : Eigen::RowVectorXd::Zero(raw.cols()).eval();
        }
    }
    return clipped;
}

std::vector<TrainingExample> label_flip_examples(const std::vector<TrainingExample>& examples) {
    std::vector<TrainingExample> flipped;
    flipped.reserve(examples.size());
    for (const auto& ex : examples) {
        for (int neg : ex.negatives) {
            TrainingExample f;
            f.user_id = ex.user_id;
            f.positive = neg;
            f.negatives = {ex.positive};
            flipped.push_back(std::move(f));
        }
    }
    return flipped;
}

std::vector<TrainingExample> fed_attack_examples(const UserModel& user, const GlobalModel& model,
                                                 const InteractionDataset& dataset, int user_id,
                                                 int num_negatives) {
    const int M = model.num_items();
    std::vector<std::pair<double, int>> scored;  // (score, item), non-history only
    scored.reserve(M);
    for (int i = 0; i < M; ++i) {
        if (dataset.interacted(user_id, i)) continue;
        scored.emplace_back(user.embedding.dot(model.item_embeddings.row(i)), i);
    }
    if (scored.size() < 2) {
        throw ConfigError("fed_attack: not enough candidate items");
    }
    // ascending by score, ties toward lower item id
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;
    });

    const int num_steps = static_cast<int>(dataset.train[user_id].size());
    const int C = static_cast<int>(scored.size());
    std::vector<TrainingExample> out;
    out.reserve(num_steps);
    for (int step = 0; step < num_steps; ++step) {
        TrainingExample ex;
        ex.user_id = user_id;
        ex.positive = scored[step % C].second;  // farthest from the user's taste
        ex.negatives.reserve(num_negatives);
        for (int j = 0; j < num_negatives; ++j) {
            int idx = C - 1 - ((step * num_negatives + j) % C);  // closest to the user's taste
            ex.negatives.push_back(scored[idx].second);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

CohortStats cohort_entrywise_stats(const std::vector<Eigen::MatrixXd>& grads) {
    if (grads.empty()) {
        throw ConfigError("cohort stats: empty cohort");
    }
    const auto rows = grads[0].rows();
    const auto cols = grads[0].cols();
    for (const auto& g : grads) {
        if (g.rows() != rows || g.cols() != cols) {
            throw ConfigError("cohort stats: gradient shapes mismatch");
        }
    }
    CohortStats stats;
    stats.mean = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& g : grads) stats.mean += g;
    stats.mean /= static_cast<double>(grads.size());

    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& g : grads) var += (g - stats.mean).cwiseAbs2();
    var /= static_cast<double>(grads.size());
    stats.stddev = var.cwiseSqrt();
    return stats;
}

Eigen::MatrixXd gaussian_update(const CohortStats& stats, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd out(stats.mean.rows(), stats.mean.cols());
    for (int i = 0; i < out.rows(); ++i) {
        for (int j = 0; j < out.cols(); ++j) {
            out(i, j) = stats.mean(i, j) + stats.stddev(i, j) * normal(rng);
        }
    }
    return out;
}

Eigen::MatrixXd lie_update(const CohortStats& stats, double z) {
    return stats.mean + z * stats.stddev;
}

Eigen::MatrixXd fang_update(const CohortStats& stats, double gamma) {
    return stats.mean - gamma * stats.mean.cwiseSign().cwiseProduct(stats.stddev);
}

}  // namespace fedsim
