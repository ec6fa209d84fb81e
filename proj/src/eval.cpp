#include "fedsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedsim/errors.hpp"

namespace fedsim {

MetricResult evaluate(const GlobalModel& model, const std::vector<UserModel>& user_models,
                      const InteractionDataset& dataset, int k, EvalSplit split,
                      const std::vector<bool>& benign) {
    if (k < 1) throw ConfigError("evaluate: k must be >= 1");
    MetricResult result;
    result.k = k;

    const int M = model.num_items();
    double hr_sum = 0.0, ndcg_sum = 0.0;
    std::vector<char> excluded(M);
    for (int u = 0; u < dataset.num_users; ++u) {
        if (!benign.empty() && !benign[u]) continue;

        const int target = split == EvalSplit::test ? dataset.test[u] : dataset.validation[u];
        std::fill(excluded.begin(), excluded.end(), 0);
        for (int t : dataset.train[u]) excluded[t] = 1;
        if (split == EvalSplit::test) excluded[dataset.validation[u]] = 1;
        excluded[target] = 0;  // the held-out item always competes

        Eigen::VectorXd scores = model.item_embeddings * user_models[u].embedding;
        const double target_score = scores(target);

        // rank = 1 + better-scoring candidates; ties rank the lower item id first
        int rank = 1;
        for (int i = 0; i < M; ++i) {
            if (i == target || excluded[i]) continue;
            if (scores(i) > target_score || (scores(i) == target_score && i < target)) ++rank;
        }
        if (rank <= k) {
            hr_sum += 1.0;
            ndcg_sum += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        }
        ++result.num_users_evaluated;
    }
    if (result.num_users_evaluated > 0) {
        result.hr_at_k = hr_sum / result.num_users_evaluated;
        result.ndcg_at_k = ndcg_sum / result.num_users_evaluated;
    }
    return result;
}

}  // namespace fedsim
