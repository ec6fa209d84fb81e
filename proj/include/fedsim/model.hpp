#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Shared item-embedding matrix, one row per item. The predictor is a
// parameter-free dot product, so this is the whole uploadable model.
struct GlobalModel {
    Eigen::MatrixXd item_embeddings;  // M x d
    int dim() const { return static_cast<int>(item_embeddings.cols()); }
    int num_items() const { return static_cast<int>(item_embeddings.rows()); }

    static GlobalModel init_uniform(int num_items, int dim, Rng& rng, double scale = 0.01);
};

// Local user embedding. Stays on the client, never serialized into an upload.
struct UserModel {
    Eigen::VectorXd embedding;

    static UserModel init_uniform(int dim, Rng& rng, double scale = 0.01);
};

struct LocalGradient {
    Eigen::MatrixXd item_grad;   // M x d, zero rows outside touched_items
    Eigen::VectorXd user_grad;   // d
    std::vector<int> touched_items;  // sorted, unique
    double loss = 0.0;

    static LocalGradient zeros(int num_items, int dim);
    void add_item_row(int item, const Eigen::RowVectorXd& g);
    void finalize_touched();  // sort + dedup touched_items
};

double predict(const UserModel& user, const GlobalModel& model, int item_id);

// BPR pairwise loss with L2 on the touched parameters, summed over the
// example's negatives. Exact analytic gradients.
LocalGradient bpr_gradient(const UserModel& user, const GlobalModel& model,
                           const TrainingExample& example, double l2_coeff);

// InfoNCE over the user's interacted items: for each anchor, one positive
// partner from the same history and `num_negatives` items from outside it.
// Logits are raw dot products of item embeddings. Returns a zero gradient
// (loss 0) when the history has fewer than 2 items.
LocalGradient infonce_gradient(const std::vector<int>& user_items, const GlobalModel& model,
                               int num_negatives, Rng& rng);

// L_rec + alpha * L_cl when cl_enabled, else L_rec alone. The CL anchors are
// the distinct positives of the examples (the client's own item set).
LocalGradient combined_client_gradient(const UserModel& user, const GlobalModel& model,
                                       const std::vector<TrainingExample>& examples,
                                       bool cl_enabled, double alpha, double l2_coeff,
                                       int num_negatives_cl, Rng& rng);

// Average squared pairwise distance over the sampled item rows.
double uniformity_estimate(const GlobalModel& model, const std::vector<int>& sample_items);

// Same measure over explicit rows; used by the server on virtual updates.
double uniformity_of_rows(const Eigen::MatrixXd& rows);

}  // namespace fedsim
