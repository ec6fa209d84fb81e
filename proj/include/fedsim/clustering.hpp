#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim {

struct Clustering {
    std::vector<int> assignments;   // per point, cluster index in [0, k)
    Eigen::MatrixXd centroids;      // k x d
    double within_variance = 0.0;   // sum of squared distances to assigned centroid
};

// k-means++ init, Lloyd iterations until centroid shift < tol or max_iter.
// Empty clusters are repaired by stealing the farthest point from the
// largest cluster.
Clustering kmeans(const Eigen::MatrixXd& points, int k, Rng& rng, int max_iter = 50,
                  double tol = 1e-6);

// Best within-variance over `restarts` seeded runs.
Clustering kmeans_restarts(const Eigen::MatrixXd& points, int k, int restarts, Rng& rng);

// Gap Statistics test on scalar values: true iff the data looks like more
// than one cluster (gap_1 < gap_2 - s_2 after min-max normalization, against
// B uniform reference samples). All-equal input returns false.
bool gap_statistics(const std::vector<double>& values, int num_reference_samples, Rng& rng);

}  // namespace fedsim
