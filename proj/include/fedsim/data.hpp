#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim {

struct Interaction {
    int user_id = 0;
    int item_id = 0;
    long long timestamp = 0;
};

// Per-user leave-one-out split: chronologically last interaction is the test
// item, second-to-last is validation, the rest is training data. Users with
// fewer than 3 interactions are rejected at load time.
struct InteractionDataset {
    int num_users = 0;
    int num_items = 0;
    std::vector<std::vector<int>> train;   // per user, timestamp order
    std::vector<int> validation;           // one item per user
    std::vector<int> test;                 // one item per user
    std::vector<std::unordered_set<int>> history;  // train + val + test item ids
    long long num_interactions = 0;        // kept interactions
    int dropped_users = 0;                 // users removed by the <3 rule

    bool interacted(int user, int item) const { return history[user].count(item) > 0; }
};

struct TrainingExample {
    int user_id = 0;
    int positive = 0;
    std::vector<int> negatives;
};

struct SyntheticParams {
    int num_users = 0;
    int num_items = 0;
    int num_latent_groups = 0;
    int interactions_per_user = 0;
    std::uint64_t seed = 0;
};

// Parses MovieLens-style `UserID::MovieID::Rating::Timestamp` lines. All
// ratings are treated as implicit positives; users and items are densely
// re-indexed in first-appearance order.
InteractionDataset load_ml1m(const std::string& path);

// Group-structured synthetic data: each user draws 90% of interactions from
// their own group's items and 10% uniformly. Timestamps are sequential.
InteractionDataset generate_synthetic(const SyntheticParams& params);

// One TrainingExample per train positive of the user. Negatives are uniform
// over items the user never interacted with (train+val+test).
std::vector<TrainingExample> sample_batch(const InteractionDataset& dataset, int user_id,
                                          int num_negatives, Rng& rng);

}  // namespace fedsim
