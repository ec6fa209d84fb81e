#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "fedsim/errors.hpp"

namespace fedsim {

GlobalModel GlobalModel::init_uniform(int num_items, int dim, Rng& rng, double scale) {
    GlobalModel m;
    m.item_embeddings.resize(num_items, dim);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (int i = 0; i < num_items; ++i)
        for (int j = 0; j < dim; ++j) m.item_embeddings(i, j) = dist(rng);
    return m;
}

UserModel UserModel::init_uniform(int dim, Rng& rng, double scale) {
    UserModel u;
    u.embedding.resize(dim);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (int j = 0; j < dim; ++j) u.embedding(j) = dist(rng);
    return u;
}

LocalGradient LocalGradient::zeros(int num_items, int dim) {
    LocalGradient g;
    g.item_grad = Eigen::MatrixXd::Zero(num_items, dim);
    g.user_grad = Eigen::VectorXd::Zero(dim);
    return g;
}

void LocalGradient::add_item_row(int item, const Eigen::RowVectorXd& g) {
    item_grad.row(item) += g;
    touched_items.push_back(item);
}

void LocalGradient::finalize_touched() {
    std::sort(touched_items.begin(), touched_items.end());
    touched_items.erase(std::unique(touched_items.begin(), touched_items.end()),
                        touched_items.end());
}

double predict(const UserModel& user, const GlobalModel& model, int item_id) {
    if (item_id < 0 || item_id >= model.num_items()) {
        throw ConfigError("predict: item id out of range");
    }
    return user.embedding.dot(model.item_embeddings.row(item_id));
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_finite(const LocalGradient& g) {
    if (!g.item_grad.allFinite() || !g.user_grad.allFinite() || !std::isfinite(g.loss)) {
        throw NumericError("non-finite gradient");
    }
}

}  // namespace

LocalGradient bpr_gradient(const UserModel& user, const GlobalModel& model,
                           const TrainingExample& example, double l2_coeff) {
    if (example.negatives.empty()) {
        throw ConfigError("bpr_gradient: example needs at least one negative");
    }
    const auto& V = model.item_embeddings;
    const Eigen::VectorXd& u = user.embedding;
    LocalGradient g = LocalGradient::zeros(model.num_items(), model.dim());

    const int pos = example.positive;
    const double y_pos = u.dot(V.row(pos));
    for (int neg : example.negatives) {
        const double y_neg = u.dot(V.row(neg));
        const double s = sigmoid(y_pos - y_neg);
        // d/ds of -log(sigmoid(s)) at s = y_pos - y_neg
        const double coeff = s - 1.0;

        g.loss += -std::log(s) +
                  l2_coeff * (u.squaredNorm() + V.row(pos).squaredNorm() + V.row(neg).squaredNorm());
        g.user_grad += coeff * (V.row(pos) - V.row(neg)).transpose() + 2.0 * l2_coeff * u;
        g.add_item_row(pos, coeff * u.transpose() + 2.0 * l2_coeff * V.row(pos));
        g.add_item_row(neg, -coeff * u.transpose() + 2.0 * l2_coeff * V.row(neg));
    }
    g.finalize_touched();
    check_finite(g);
    return g;
}

LocalGradient infonce_gradient(const std::vector<int>& user_items, const GlobalModel& model,
                               int num_negatives, Rng& rng) {
    const auto& V = model.item_embeddings;
    const int M = model.num_items();
    LocalGradient g = LocalGradient::zeros(M, model.dim());

    std::vector<int> anchors = user_items;
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
    if (static_cast<int>(anchors.size()) < 2) {
        return g;  // no positive partner available, CL term skipped
    }
    if (num_negatives < 1) {
        throw ConfigError("infonce_gradient: num_negatives must be >= 1");
    }
    std::unordered_set<int> owned(anchors.begin(), anchors.end());
    if (static_cast<int>(owned.size()) >= M) {
        throw ConfigError("infonce_gradient: no item outside the user's set");
    }

    std::uniform_int_distribution<int> any_item(0, M - 1);
    std::uniform_int_distribution<int> partner_idx(0, static_cast<int>(anchors.size()) - 2);

    for (std::size_t ai = 0; ai < anchors.size(); ++ai) {
        const int anchor = anchors[ai];
        // positive partner: uniform over the user's other items
        int pidx = partner_idx(rng);
        if (pidx >= static_cast<int>(ai)) ++pidx;
        const int positive = anchors[pidx];
        std::vector<int> negatives(num_negatives);
        for (int& n : negatives) {
            n = any_item(rng);
            while (owned.count(n)) n = any_item(rng);
        }

        // logits: [positive, negatives...]; softmax cross-entropy on index 0
        Eigen::VectorXd logits(num_negatives + 1);
        logits(0) = V.row(anchor).dot(V.row(positive));
        for (int j = 0; j < num_negatives; ++j) {
            logits(j + 1) = V.row(anchor).dot(V.row(negatives[j]));
        }
        const double zmax = logits.maxCoeff();
        Eigen::VectorXd expz = (logits.array() - zmax).exp();
        const double Z = expz.sum();
        g.loss += std::log(Z) + zmax - logits(0);

        Eigen::VectorXd q = expz / Z;  // softmax probabilities
        // dL/dlogit_0 = q_0 - 1, dL/dlogit_j = q_j
        Eigen::RowVectorXd anchor_grad = (q(0) - 1.0) * V.row(positive);
        g.add_item_row(positive, (q(0) - 1.0) * V.row(anchor));
        for (int j = 0; j < num_negatives; ++j) {
            anchor_grad += q(j + 1) * V.row(negatives[j]);
            g.add_item_row(negatives[j], q(j + 1) * V.row(anchor));
        }
        g.add_item_row(anchor, anchor_grad);
    }
    g.finalize_touched();
    check_finite(g);
    return g;
}

LocalGradient combined_client_gradient(const UserModel& user, const GlobalModel& model,
                                       const std::vector<TrainingExample>& examples,
                                       bool cl_enabled, double alpha, double l2_coeff,
                                       int num_negatives_cl, Rng& rng) {
    LocalGradient total = LocalGradient::zeros(model.num_items(), model.dim());
    for (const auto& ex : examples) {
        LocalGradient g = bpr_gradient(user, model, ex, l2_coeff);
        total.item_grad += g.item_grad;
        total.user_grad += g.user_grad;
        total.loss += g.loss;
        total.touched_items.insert(total.touched_items.end(), g.touched_items.begin(),
                                   g.touched_items.end());
    }
    if (cl_enabled && alpha != 0.0) {
        std::vector<int> user_items;
        user_items.reserve(examples.size());
        for (const auto& ex : examples) user_items.push_back(ex.positive);
        LocalGradient cl = infonce_gradient(user_items, model, num_negatives_cl, rng);
        total.item_grad += alpha * cl.item_grad;
        total.loss += alpha * cl.loss;
        total.touched_items.insert(total.touched_items.end(), cl.touched_items.begin(),
                                   cl.touched_items.end());
    }
    total.finalize_touched();
    check_finite(total);
    return total;
}

double uniformity_of_rows(const Eigen::MatrixXd& rows) {
    const int T = static_cast<int>(rows.rows());
    if (T < 2) {
        throw ConfigError("uniformity: need at least 2 items");
    }
    double sum = 0.0;
    for (int j = 0; j < T; ++j) {
        for (int k = j + 1; k < T; ++k) {
            sum += (rows.row(j) - rows.row(k)).squaredNorm();
        }
    }
    return 2.0 * sum / (static_cast<double>(T) * (T - 1));
}

double uniformity_estimate(const GlobalModel& model, const std::vector<int>& sample_items) {
    std::unordered_set<int> seen;
    for (int id : sample_items) {
        if (id < 0 || id >= model.num_items() || !seen.insert(id).second) {
            throw ConfigError("uniformity_estimate: sample ids must be distinct and in range");
        }
    }
    Eigen::MatrixXd rows(sample_items.size(), model.dim());
    for (std::size_t j = 0; j < sample_items.size(); ++j) {
        rows.row(j) = model.item_embeddings.row(sample_items[j]);
    }
    return uniformity_of_rows(rows);
}

}  // namespace fedsim
