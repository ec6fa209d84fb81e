#pragma once

#include <string>
#include <vector>

#include "fedsim/clustering.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/update.hpp"

namespace fedsim {

enum class AttackKind {
    none,
    label_flip,
    fed_attack,
    gaussian,
    lie,
    fang,
    cluster_attack,
    cluster_attack_cl,
};

AttackKind attack_kind_from_string(const std::string& name);
bool is_model_poisoning(AttackKind kind);

struct AttackParams {
    int k_init = 2;
    int k_min = 1;
    int k_max = 50;
    int threshold_r = 100;
    double ema_decay = 0.9;  // beta; not stated by the source method, configurable
    double lie_z = 1.5;
    double fang_gamma = 3.0;
    double cl_alpha = 1.0;       // for the +CL attack variant
    int cl_negatives = 15;
};

// Persistent adaptive-clustering controller state.
struct AttackState {
    int k = 2;
    int k_min = 1;
    int k_max = 50;
    int threshold_r = 100;
    double ema_decay = 0.9;
    double ema_loss = 0.0;
    double prev_corrected = 0.0;
    bool has_prev = false;
    int t = 0;
    int n_inc = 0;
    int n_dec = 0;

    static AttackState from_params(const AttackParams& p) {
        AttackState s;
        s.k = p.k_init;
        s.k_min = p.k_min;
        s.k_max = p.k_max;
        s.threshold_r = p.threshold_r;
        s.ema_decay = p.ema_decay;
        return s;
    }
};

// One adaptive-clustering step: EMA-track the attack loss, bump the
// inc/dec counter, and resize K when one counter leads by the threshold.
// The comparison is skipped at t == 1 (no previous corrected value).
void adaptive_update_k(AttackState& state, double new_attack_loss);

// Raw cluster-collapse gradient: 2 * (v_i - centroid(v_i)) per row,
// centroids held fixed. Returns the dense M x d matrix.
Eigen::MatrixXd cluster_attack_raw_gradient(const GlobalModel& model,
                                            const Clustering& clustering);

// Row-norm statistics over the touched rows of a benign-style gradient.
struct NormStats {
    double mean = 0.0;
    double stddev = 0.0;
};
NormStats touched_row_norm_stats(const LocalGradient& grad);

// Per-row clip: bound b_i = mu + lambda_i * sigma with lambda_i ~ U[0, 3];
// rows already under their bound are left bit-identical.
Eigen::MatrixXd clip_rows_to_norm_bounds(const Eigen::MatrixXd& raw, const NormStats& stats,
                                         Rng& rng);

// Swaps positive and negative roles in every example.
std::vector<TrainingExample> label_flip_examples(const std::vector<TrainingExample>& examples);

// Replaces each example's items with adversarially chosen ones: for step i,
// the i-th lowest-scoring non-history item becomes the positive and the
// top-scoring ones become negatives. Ties break toward the lower item id.
std::vector<TrainingExample> fed_attack_examples(const UserModel& user, const GlobalModel& model,
                                                 const InteractionDataset& dataset, int user_id,
                                                 int num_negatives);

// Entrywise mean/stddev over a cohort of benign-style gradients.
struct CohortStats {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd stddev;
};
CohortStats cohort_entrywise_stats(const std::vector<Eigen::MatrixXd>& grads);

Eigen::MatrixXd gaussian_update(const CohortStats& stats, Rng& rng);
Eigen::MatrixXd lie_update(const CohortStats& stats, double z);
Eigen::MatrixXd fang_update(const CohortStats& stats, double gamma);

}  // namespace fedsim
