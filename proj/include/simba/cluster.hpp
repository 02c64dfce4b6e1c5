#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "simba/trajectory.hpp"

namespace simba {

/// Points are the columns of the matrix (one column per interleaf).
using PointMatrix = Eigen::MatrixXd;

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;
  std::size_t n_init = 10;
};

struct ClusterAssignment {
  std::vector<std::size_t> labels;
  Eigen::MatrixXd centroids;  // one column per cluster
  std::size_t k = 0;
  double inertia = 0.0;
  std::vector<std::size_t> largest_cluster;
  double mean_centroid_distance_largest = 0.0;
  std::vector<double> inertia_history;  // per Lloyd iteration of the returned run

  std::vector<std::size_t> cluster_sizes() const;
};

/// k-means++ seeding: first centroid uniform, later ones with probability
/// proportional to the squared distance to the nearest chosen centroid.
Eigen::MatrixXd kmeans_pp_init(const PointMatrix& points, std::size_t k, std::uint64_t seed);

/// Best of n_init seeded Lloyd runs. Empty clusters are re-seeded with the
/// point farthest from its centroid.
ClusterAssignment kmeans(const PointMatrix& points, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& options = {});

/// Sum of squared distances of every point to its labelled centroid.
double compute_inertia(const PointMatrix& points, const std::vector<std::size_t>& labels,
                       const Eigen::MatrixXd& centroids);

/// Mean Euclidean distance of the largest cluster's points to its centroid.
double largest_cluster_compactness(const PointMatrix& points, const ClusterAssignment& a);

struct KSelection {
  std::size_t k_star = 0;
  ClusterAssignment assignment;
  std::vector<std::size_t> k_values;
  std::vector<double> criteria;  // per k_values entry
};

/// Runs kmeans for every k in [k_min, k_max] and keeps the k whose largest
/// cluster is most compact (ties go to the smaller k).
KSelection select_k(const PointMatrix& points, std::size_t k_min, std::size_t k_max,
                    std::uint64_t seed, const KMeansOptions& options = {});

/// Spokes of all interleaves in the largest cluster, SI readouts excluded
/// unless include_si is set.
std::vector<std::size_t> expand_to_readouts(const ClusterAssignment& assignment,
                                            const RadialTrajectory& traj, bool include_si = false);

}  // namespace simba
