#pragma once

#include <string>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/update.hpp"

namespace fedsim {

enum class FilterKind { none, union_filter };
enum class AggregateKind { mean, trimmed_mean, krum, multi_krum, norm_bound };

struct DefenseParams {
    FilterKind filter = FilterKind::none;
    AggregateKind aggregate = AggregateKind::mean;
    double trim_fraction = 0.1;
    int krum_f = 0;            // assumed number of malicious updates
    int multi_krum_c = -1;     // -1: n - f
    double norm_tau = 0.1;
    int uniformity_sample = 500;  // T, capped at M
    int gap_reference_samples = 50;  // B
    double virtual_eta = 2e-3;       // learning rate of the virtual update
    bool per_client_sample = false;  // re-sample the T items per update
};

DefenseParams defense_from_strings(const std::string& filter, const std::string& aggregate);

struct FilterResult {
    std::vector<int> kept;       // indices into the updates vector, ascending
    std::vector<int> dropped;    // ascending
    std::vector<double> uniformity;  // d_i per update (empty when filter off)
    bool multi_cluster = false;
};

// Uniformity-based filter: virtually applies each update, estimates the
// uniformity d_i of the updated embeddings over a sampled item set, and if
// the d_i values form two clusters drops the smaller one (ties: drop the
// cluster with smaller mean d_i). Fewer than 2 updates pass through.
FilterResult union_filter(const std::vector<ClientUpdate>& updates, const GlobalModel& model,
                          const DefenseParams& params, Rng& rng);

Eigen::MatrixXd mean_aggregate(const std::vector<ClientUpdate>& updates);
Eigen::MatrixXd trimmed_mean_aggregate(const std::vector<ClientUpdate>& updates,
                                       double trim_fraction);
// Krum score of update i: sum of squared distances to its n-f-2 nearest
// other updates. Returns the index of the argmin (ties: lowest client id).
int krum_select(const std::vector<ClientUpdate>& updates, int f);
Eigen::MatrixXd multi_krum_aggregate(const std::vector<ClientUpdate>& updates, int f, int c);
Eigen::MatrixXd norm_bound_aggregate(const std::vector<ClientUpdate>& updates, double tau);

// Full pipeline: filter, then aggregate the kept updates.
struct DefenseOutcome {
    Eigen::MatrixXd aggregate;
    FilterResult filter;
    bool applied = false;  // false when nothing survived
};
DefenseOutcome run_defense(const std::vector<ClientUpdate>& updates, const GlobalModel& model,
                           const DefenseParams& params, Rng& rng);

}  // namespace fedsim
