#include "fedsim/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

double sq_dist(const Eigen::MatrixXd& points, int row, const Eigen::RowVectorXd& c) {
    return (points.row(row) - c).squaredNorm();
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& points, int k, Rng& rng) {
    const int n = static_cast<int>(points.rows());
    Eigen::MatrixXd centroids(k, points.cols());
    std::uniform_int_distribution<int> first(0, n - 1);
    centroids.row(0) = points.row(first(rng));

    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (int j = 0; j < c; ++j) best = std::min(best, sq_dist(points, i, centroids.row(j)));
            d2[i] = best;
            total += best;
        }
        int chosen;
        if (total <= 0.0) {
            chosen = first(rng);  // all points coincide with existing centroids
        } else {
            double target = uniform_real(rng, 0.0, total);
            double acc = 0.0;
            chosen = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.row(c) = points.row(chosen);
    }
    return centroids;
}

}  // namespace

Clustering kmeans(const Eigen::MatrixXd& points, int k, Rng& rng, int max_iter, double tol) {
    const int n = static_cast<int>(points.rows());
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    if (n == 0) throw ConfigError("kmeans: no points");
    if (k > n) throw ConfigError("kmeans: k exceeds number of points");

    Eigen::MatrixXd centroids = kmeanspp_init(points, k, rng);
    std::vector<int> assign(n, 0);
    std::vector<int> cluster_size(k, 0);

    for (int iter = 0; iter < max_iter; ++iter) {
        // assignment step
        std::fill(cluster_size.begin(), cluster_size.end(), 0);
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(points, i, centroids.row(0));
            for (int c = 1; c < k; ++c) {
                double d = sq_dist(points, i, centroids.row(c));
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
            ++cluster_size[best];
        }

        // empty-cluster repair: steal the farthest point from the largest cluster
        for (int c = 0; c < k; ++c) {
            if (cluster_size[c] > 0) continue;
            int donor = static_cast<int>(std::max_element(cluster_size.begin(), cluster_size.end()) -
                                         cluster_size.begin());
            int far_point = -1;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                if (assign[i] != donor) continue;
                double d = sq_dist(points, i, centroids.row(donor));
                if (d > far_d) {
                    far_d = d;
                    far_point = i;
                }
            }
            assign[far_point] = c;
            --cluster_size[donor];
            ++cluster_size[c];
        }

        // update step
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
        for (int i = 0; i < n; ++i) next.row(assign[i]) += points.row(i);
        for (int c = 0; c < k; ++c) next.row(c) /= static_cast<double>(cluster_size[c]);

        double shift = (next - centroids).rowwise().norm().maxCoeff();
        centroids = next;
        if (shift < tol) break;
    }

    // Hartigan-style refinement: Lloyd fixed points can still be improved by
    // single-point reassignments scored with exact objective deltas.
    for (int sweep = 0; sweep < 20; ++sweep) {
        // exact means of the current assignment
        Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(k, points.cols());
        for (int i = 0; i < n; ++i) mu.row(assign[i]) += points.row(i);
        for (int c = 0; c < k; ++c) {
            if (cluster_size[c] > 0) mu.row(c) /= static_cast<double>(cluster_size[c]);
        }
        bool moved = false;
        for (int i = 0; i < n; ++i) {
            const int a = assign[i];
            const int na = cluster_size[a];
            if (na <= 1) continue;  // never empty a cluster
            const double removal_gain =
                na / (na - 1.0) * sq_dist(points, i, mu.row(a));
            int best_c = a;
            double best_delta = -1e-12;
            for (int c = 0; c < k; ++c) {
                if (c == a) continue;
                const int nb = cluster_size[c];
                const double delta =
                    nb / (nb + 1.0) * sq_dist(points, i, mu.row(c)) - removal_gain;
                if (delta < best_delta) {
                    best_delta = delta;
                    best_c = c;
                }
            }
            if (best_c != a) {
                mu.row(a) = (mu.row(a) * cluster_size[a] - points.row(i)) /
                            (cluster_size[a] - 1.0);
                mu.row(best_c) = (mu.row(best_c) * cluster_size[best_c] + points.row(i)) /
                                 (cluster_size[best_c] + 1.0);
                --cluster_size[a];
                ++cluster_size[best_c];
                assign[i] = best_c;
                moved = true;
            }
        }
        centroids = mu;
        if (!moved) break;
    }

    Clustering out;
    out.assignments = std::move(assign);
    out.centroids = std::move(centroids);
    // recompute centroids as exact means of final assignment, then variance
    {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(k, points.cols());
        std::vector<int> size(k, 0);
        for (int i = 0; i < n; ++i) {
            mean.row(out.assignments[i]) += points.row(i);
            ++size[out.assignments[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (size[c] > 0) mean.row(c) /= static_cast<double>(size[c]);
        }
        out.centroids = std::move(mean);
    }
    out.within_variance = 0.0;
    for (int i = 0; i < n; ++i) {
        out.within_variance += sq_dist(points, i, out.centroids.row(out.assignments[i]));
    }
    return out;
}

Clustering kmeans_restarts(const Eigen::MatrixXd& points, int k, int restarts, Rng& rng) {
    Clustering best;
    double best_w = std::numeric_limits<double>::max();
    for (int r = 0; r < restarts; ++r) {
        Clustering c = kmeans(points, k, rng);
        if (c.within_variance < best_w) {
            best_w = c.within_variance;
            best = std::move(c);
        }
    }
    return best;
}

bool gap_statistics(const std::vector<double>& values, int num_reference_samples, Rng& rng) {
    const int n = static_cast<int>(values.size());
    const int B = num_reference_samples;
    if (n < 2) throw ConfigError("gap_statistics: need at least 2 values");
    if (B < 1) throw ConfigError("gap_statistics: need at least 1 reference sample");

    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());
    if (hi <= lo) return false;  // all values identical, one cluster by definition

    Eigen::MatrixXd normalized(n, 1);
    for (int i = 0; i < n; ++i) normalized(i, 0) = (values[i] - lo) / (hi - lo);

    constexpr double kLogFloor = 1e-12;  // perfect clustering would give log(0)
    double gap[2], s[2];
    for (int k = 1; k <= 2; ++k) {
        double wk = kmeans(normalized, k, rng).within_variance;

        std::vector<double> log_wstar(B);
        for (int b = 0; b < B; ++b) {
            Eigen::MatrixXd ref(n, 1);
            for (int i = 0; i < n; ++i) ref(i, 0) = uniform_real(rng, 0.0, 1.0);
            double w = kmeans(ref, k, rng).within_variance;
            log_wstar[b] = std::log(std::max(w, kLogFloor));
        }
        double mean_log = 0.0;
        for (double v : log_wstar) mean_log += v;
        mean_log /= B;

        gap[k - 1] = mean_log - std::log(std::max(wk, kLogFloor));
        double var = 0.0;
        for (double v : log_wstar) var += (v - mean_log) * (v - mean_log);
        s[k - 1] = std::sqrt((1.0 + B) / (static_cast<double>(B) * B) * var);
    }
    return gap[0] < gap[1] - s[1];
}

}  // namespace fedsim
