#include "fedsim/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedsim/clustering.hpp"
#include "fedsim/errors.hpp"

namespace fedsim {

DefenseParams defense_from_strings(const std::string& filter, const std::string& aggregate) {
    DefenseParams p;
    if (filter == "none") {
        p.filter = FilterKind::none;
    } else if (filter == "union") {
        p.filter = FilterKind::union_filter;
    } else {
        throw ConfigError("unknown filter: " + filter);
    }
    if (aggregate == "mean") {
        p.aggregate = AggregateKind::mean;
    } else if (aggregate == "trimmed_mean") {
        p.aggregate = AggregateKind::trimmed_mean;
    } else if (aggregate == "krum") {
        p.aggregate = AggregateKind::krum;
    } else if (aggregate == "multi_krum") {
        p.aggregate = AggregateKind::multi_krum;
    } else if (aggregate == "norm_bound") {
        p.aggregate = AggregateKind::norm_bound;
    } else {
        throw ConfigError("unknown aggregator: " + aggregate);
    }
    return p;
}

namespace {

std::vector<int> sample_distinct_items(int num_items, int count, Rng& rng) {
    std::vector<int> all(num_items);
    std::iota(all.begin(), all.end(), 0);
    // partial Fisher-Yates
    for (int i = 0; i < count; ++i) {
        int j = uniform_int(rng, i, num_items - 1);
        std::swap(all[i], all[j]);
    }
    all.resize(count);
    return all;
}

double virtual_uniformity(const ClientUpdate& update, const GlobalModel& model,
                          const std::vector<int>& items, double eta) {
    Eigen::MatrixXd rows(items.size(), model.dim());
    for (std::size_t j = 0; j < items.size(); ++j) {
        rows.row(j) =
            model.item_embeddings.row(items[j]) - eta * update.item_grad.row(items[j]);
    }
    return uniformity_of_rows(rows);
}

}  // namespace

FilterResult union_filter(const std::vector<ClientUpdate>& updates, const GlobalModel& model,
                          const DefenseParams& params, Rng& rng) {
    FilterResult result;
    const int n = static_cast<int>(updates.size());
    if (n < 2) {
        for (int i = 0; i < n; ++i) result.kept.push_back(i);
        return result;
    }
    const int T = std::min(params.uniformity_sample, model.num_items());
    if (T < 2) throw ConfigError("union_filter: uniformity sample must have >= 2 items");

    std::vector<int> shared_items;
    if (!params.per_client_sample) shared_items = sample_distinct_items(model.num_items(), T, rng);

    result.uniformity.resize(n);
    for (int i = 0; i < n; ++i) {
        const std::vector<int> items = params.per_client_sample
                                           ? sample_distinct_items(model.num_items(), T, rng)
                                           : shared_items;
        result.uniformity[i] = virtual_uniformity(updates[i], model, items, params.virtual_eta);
    }

    result.multi_cluster = gap_statistics(result.uniformity, params.gap_reference_samples, rng);
    if (!result.multi_cluster) {
        for (int i = 0; i < n; ++i) result.kept.push_back(i);
        return result;
    }

    Eigen::MatrixXd points(n, 1);
    for (int i = 0; i < n; ++i) points(i, 0) = result.uniformity[i];
    Clustering split = kmeans(points, 2, rng);

    int size[2] = {0, 0};
    double sum_d[2] = {0.0, 0.0};
    for (int i = 0; i < n; ++i) {
        ++size[split.assignments[i]];
        sum_d[split.assignments[i]] += result.uniformity[i];
    }
    int drop;
    if (size[0] != size[1]) {
        drop = size[0] < size[1] ? 0 : 1;
    } else {
        // tie: lower uniformity means more clustered embeddings, the
        // suspicious signature under the CL task
        drop = sum_d[0] < sum_d[1] ? 0 : 1;
    }
    for (int i = 0; i < n; ++i) {
        if (split.assignments[i] == drop) {
            result.dropped.push_back(i);
        } else {
            result.kept.push_back(i);
        }
    }
    return result;
}

Eigen::MatrixXd mean_aggregate(const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) throw ConfigError("mean_aggregate: no updates");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(updates[0].item_grad.rows(),
                                                updates[0].item_grad.cols());
    for (const auto& u : updates) out += u.item_grad;
    return out / static_cast<double>(updates.size());
}

Eigen::MatrixXd trimmed_mean_aggregate(const std::vector<ClientUpdate>& updates,
                                       double trim_fraction) {
    const int n = static_cast<int>(updates.size());
    if (n == 0) throw ConfigError("trimmed_mean: no updates");
    const int trim = static_cast<int>(std::ceil(trim_fraction * n));
    if (2 * trim >= n) throw ConfigError("trimmed_mean: trim fraction removes everything");

    const auto rows = updates[0].item_grad.rows();
    const auto cols = updates[0].item_grad.cols();
    Eigen::MatrixXd out(rows, cols);
    std::vector<double> coord(n);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            for (int i = 0; i < n; ++i) coord[i] = updates[i].item_grad(r, c);
            std::sort(coord.begin(), coord.end());
            double sum = 0.0;
            for (int i = trim; i < n - trim; ++i) sum += coord[i];
            out(r, c) = sum / static_cast<double>(n - 2 * trim);
        }
    }
    return out;
}

namespace {

std::vector<double> krum_scores(const std::vector<ClientUpdate>& updates, int f) {
    const int n = static_cast<int>(updates.size());
    const int neighbors = n - f - 2;
    if (neighbors < 1) throw ConfigError("krum: need n - f - 2 >= 1");

    Eigen::MatrixXd dist2 = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double d = (updates[i].item_grad - updates[j].item_grad).squaredNorm();
            dist2(i, j) = dist2(j, i) = d;
        }
    }
    std::vector<double> scores(n);
    std::vector<double> others;
    for (int i = 0; i < n; ++i) {
        others.clear();
        for (int j = 0; j < n; ++j) {
            if (j != i) others.push_back(dist2(i, j));
        }
        std::sort(others.begin(), others.end());
        scores[i] = std::accumulate(others.begin(), others.begin() + neighbors, 0.0);
    }
    return scores;
}

}  // namespace

int krum_select(const std::vector<ClientUpdate>& updates, int f) {
    const auto scores = krum_scores(updates, f);
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
        if (scores[i] < scores[best] ||
            (scores[i] == scores[best] && updates[i].client_id < updates[best].client_id)) {
            best = i;
        }
    }
    return best;
}

Eigen::MatrixXd multi_krum_aggregate(const std::vector<ClientUpdate>& updates, int f, int c) {
    const int n = static_cast<int>(updates.size());
    if (c <= 0) c = n - f;
    c = std::min(c, n);
    if (c < 1) throw ConfigError("multi_krum: select count must be >= 1");

    std::vector<ClientUpdate> pool = updates;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(updates[0].item_grad.rows(),
                                                updates[0].item_grad.cols());
    std::vector<Eigen::MatrixXd> picked;
    for (int round = 0; round < c; ++round) {
        if (static_cast<int>(pool.size()) - f - 2 < 1) break;  // cannot score further
        int idx = krum_select(pool, f);
        picked.push_back(pool[idx].item_grad);
        pool.erase(pool.begin() + idx);
    }
    if (picked.empty()) throw ConfigError("multi_krum: nothing selectable");
    for (const auto& g : picked) sum += g;
    return sum / static_cast<double>(picked.size());
}

Eigen::MatrixXd norm_bound_aggregate(const std::vector<ClientUpdate>& updates, double tau) {
    if (updates.empty()) throw ConfigError("norm_bound: no updates");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(updates[0].item_grad.rows(),
                                                updates[0].item_grad.cols());
    for (const auto& u : updates) {
        const double norm = u.item_grad.norm();
        const double scale = norm > tau ? tau / norm : 1.0;
        out += scale * u.item_grad;
    }
    return out / static_cast<double>(updates.size());
}

DefenseOutcome run_defense(const std::vector<ClientUpdate>& updates, const GlobalModel& model,
                           const DefenseParams& params, Rng& rng) {
    DefenseOutcome outcome;
    if (params.filter == FilterKind::union_filter) {
        outcome.filter = union_filter(updates, model, params, rng);
    } else {
        for (int i = 0; i < static_cast<int>(updates.size()); ++i) outcome.filter.kept.push_back(i);
    }
    std::vector<ClientUpdate> accepted;
    accepted.reserve(outcome.filter.kept.size());
    for (int i : outcome.filter.kept) accepted.push_back(updates[i]);
    if (accepted.empty()) {
        outcome.applied = false;
        return outcome;
    }

    switch (params.aggregate) {
        case AggregateKind::mean:
            outcome.aggregate = mean_aggregate(accepted);
            break;
        case AggregateKind::trimmed_mean:
            outcome.aggregate = trimmed_mean_aggregate(accepted, params.trim_fraction);
            break;
        case AggregateKind::krum:
            outcome.aggregate = accepted[krum_select(accepted, params.krum_f)].item_grad;
            break;
        case AggregateKind::multi_krum:
            outcome.aggregate = multi_krum_aggregate(accepted, params.krum_f, params.multi_krum_c);
            break;
        case AggregateKind::norm_bound:
            outcome.aggregate = norm_bound_aggregate(accepted, params.norm_tau);
            break;
    }
    outcome.applied = true;
    return outcome;
}

}  // namespace fedsim
