#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fedsim/eval.hpp"

using namespace fedsim;

namespace {

InteractionDataset tiny_dataset(int num_users, int num_items, Rng& rng) {
    InteractionDataset ds;
    ds.num_users = num_users;
    ds.num_items = num_items;
    for (int u = 0; u < num_users; ++u) {
        std::vector<int> items;
        while (static_cast<int>(items.size()) < 5) {
            int it = uniform_int(rng, 0, num_items - 1);
            if (std::find(items.begin(), items.end(), it) == items.end()) items.push_back(it);
        }
        ds.train.push_back({items[0], items[1], items[2]});
        ds.validation.push_back(items[3]);
        ds.test.push_back(items[4]);
        ds.history.push_back({items.begin(), items.end()});
    }
    return ds;
}

// Brute-force ranking oracle: sort the full candidate score list per user.
MetricResult brute_force_eval(const GlobalModel& model, const std::vector<UserModel>& users,
                              const InteractionDataset& ds, int k, EvalSplit split) {
    MetricResult out;
    out.k = k;
    for (int u = 0; u < ds.num_users; ++u) {
        const int target = split == EvalSplit::test ? ds.test[u] : ds.validation[u];
        std::vector<std::pair<double, int>> scored;
        for (int i = 0; i < ds.num_items; ++i) {
            bool excl = std::find(ds.train[u].begin(), ds.train[u].end(), i) != ds.train[u].end();
            if (split == EvalSplit::test && i == ds.validation[u]) excl = true;
            if (i == target) excl = false;
            if (excl) continue;
            scored.emplace_back(users[u].embedding.dot(model.item_embeddings.row(i)), i);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        int rank = 0;
        for (std::size_t pos = 0; pos < scored.size(); ++pos) {
            if (scored[pos].second == target) {
                rank = static_cast<int>(pos) + 1;
                break;
            }
        }
        if (rank <= k) {
            out.hr_at_k += 1.0;
            out.ndcg_at_k += 1.0 / std::log2(rank + 1.0);
        }
        ++out.num_users_evaluated;
    }
    out.hr_at_k /= out.num_users_evaluated;
    out.ndcg_at_k /= out.num_users_evaluated;
    return out;
}

}  // namespace

TEST_CASE("evaluate: rank 1 and rank 3 formulas") {
    GlobalModel model;
    model.item_embeddings.resize(6, 1);
    model.item_embeddings << 5, 4, 3, 2, 1, 0;
    InteractionDataset ds;
    ds.num_users = 1;
    ds.num_items = 6;
    ds.train = {{5}};
    ds.validation = {4};
    ds.test = {0};  // best-scoring item
    ds.history = {{5, 4, 0}};
    std::vector<UserModel> users(1);
    users[0].embedding.resize(1);
    users[0].embedding << 1.0;

    MetricResult top = evaluate(model, users, ds, 5, EvalSplit::test);
    CHECK(top.hr_at_k == doctest::Approx(1.0));
    CHECK(top.ndcg_at_k == doctest::Approx(1.0));

    ds.test = {2};  // candidates 0,1,2,3 -> rank 3
    MetricResult third = evaluate(model, users, ds, 5, EvalSplit::test);
    CHECK(third.hr_at_k == doctest::Approx(1.0));
    CHECK(third.ndcg_at_k == doctest::Approx(0.5));  // 1/log2(4)
}

TEST_CASE("evaluate: miss yields zero and bounds hold") {
    GlobalModel model;
    model.item_embeddings.resize(10, 1);
    for (int i = 0; i < 10; ++i) model.item_embeddings(i, 0) = 10 - i;
    InteractionDataset ds;
    ds.num_users = 1;
    ds.num_items = 10;
    ds.train = {{0}};
    ds.validation = {1};
    ds.test = {9};  // lowest score -> rank 8 of 8 candidates
    ds.history = {{0, 1, 9}};
    std::vector<UserModel> users(1);
    users[0].embedding.resize(1);
    users[0].embedding << 1.0;
    MetricResult r = evaluate(model, users, ds, 5, EvalSplit::test);
    CHECK(r.hr_at_k == 0.0);
    CHECK(r.ndcg_at_k == 0.0);
}

TEST_CASE("evaluate: matches the brute-force ranking oracle on 20 random users") {
    Rng rng = make_stream(50, 0);
    InteractionDataset ds = tiny_dataset(20, 40, rng);
    GlobalModel model;
    model.item_embeddings.resize(40, 6);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 6; ++j) model.item_embeddings(i, j) = uniform_real(rng, -1, 1);
    std::vector<UserModel> users(20);
    for (auto& u : users) {
        u.embedding.resize(6);
        for (int j = 0; j < 6; ++j) u.embedding(j) = uniform_real(rng, -1, 1);
    }
    for (EvalSplit split : {EvalSplit::validation, EvalSplit::test}) {
        MetricResult a = evaluate(model, users, ds, 5, split);
        MetricResult b = brute_force_eval(model, users, ds, 5, split);
        CHECK(a.hr_at_k == doctest::Approx(b.hr_at_k).epsilon(1e-14));
        CHECK(a.ndcg_at_k == doctest::Approx(b.ndcg_at_k).epsilon(1e-14));
        CHECK(a.ndcg_at_k <= a.hr_at_k);
        CHECK(a.hr_at_k <= 1.0);
    }
}

TEST_CASE("evaluate: benign mask restricts the averaged users") {
    Rng rng = make_stream(51, 0);
    InteractionDataset ds = tiny_dataset(10, 30, rng);
    GlobalModel model;
    model.item_embeddings = Eigen::MatrixXd::Random(30, 4);
    std::vector<UserModel> users(10);
    for (auto& u : users) u.embedding = Eigen::VectorXd::Random(4);

    std::vector<bool> benign(10, true);
    benign[0] = benign[5] = false;
    MetricResult r = evaluate(model, users, ds, 5, EvalSplit::test, benign);
    CHECK(r.num_users_evaluated == 8);
}

TEST_CASE("evaluate: excluding more history never hurts the target's rank") {
    // comparing val-split (excludes train) to a run where train is larger
    Rng rng = make_stream(52, 0);
    InteractionDataset ds = tiny_dataset(15, 25, rng);
    GlobalModel model;
    model.item_embeddings = Eigen::MatrixXd::Random(25, 3);
    std::vector<UserModel> users(15);
    for (auto& u : users) u.embedding = Eigen::VectorXd::Random(3);

    MetricResult sparse = evaluate(model, users, ds, 5, EvalSplit::validation);
    // add the test item into every user's train list: candidate sets shrink
    for (int u = 0; u < ds.num_users; ++u) ds.train[u].push_back(ds.test[u]);
    MetricResult dense = evaluate(model, users, ds, 5, EvalSplit::validation);
    CHECK(dense.hr_at_k >= sparse.hr_at_k - 1e-12);
    CHECK(dense.ndcg_at_k >= sparse.ndcg_at_k - 1e-12);
}
