#pragma once

#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

enum class EvalSplit { validation, test };

struct MetricResult {
    double hr_at_k = 0.0;
    double ndcg_at_k = 0.0;
    int k = 0;
    int num_users_evaluated = 0;
};

// All-ranking protocol over benign users: score every candidate item, rank
// descending (ties toward the lower item id), look up the held-out item.
// Candidates exclude the user's train items, plus the validation item when
// evaluating the test split. `benign` may be empty (all users benign).
MetricResult evaluate(const GlobalModel& model, const std::vector<UserModel>& user_models,
                      const InteractionDataset& dataset, int k, EvalSplit split,
                      const std::vector<bool>& benign = {});

}  // namespace fedsim
