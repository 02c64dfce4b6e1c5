#include "simba/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "simba/rng.hpp"

namespace simba {

namespace {

using Index = Eigen::Index;

double squared_distance(const PointMatrix& points, Index i, const Eigen::MatrixXd& centroids, Index c) {
  return (points.col(i) - centroids.col(c)).squaredNorm();
}

void check_k(const PointMatrix& points, std::size_t k) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > static_cast<std::size_t>(points.cols())) {
    throw std::invalid_argument("kmeans: k exceeds the number of points");
  }
}

// Samples an index with probability proportional to weights; total > 0.
std::size_t sample_weighted(const std::vector<double>& weights, double total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, total);
  const double target = unif(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

void finalize_largest(const PointMatrix& points, ClusterAssignment& a) {
  const auto sizes = a.cluster_sizes();
  std::size_t best = 0;
  for (std::size_t c = 1; c < sizes.size(); ++c) {
    if (sizes[c] > sizes[best]) best = c;
  }
  a.largest_cluster.clear();
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i] == best) a.largest_cluster.push_back(i);
  }
  a.mean_centroid_distance_largest = largest_cluster_compactness(points, a);
}

struct RunResult {
  std::vector<std::size_t> labels;
  Eigen::MatrixXd centroids;
  double inertia;
  std::vector<double> history;
};

RunResult lloyd(const PointMatrix& points, Eigen::MatrixXd centroids, const KMeansOptions& opt) {
  const Index n = points.cols();
  const Index k = centroids.cols();
  RunResult run;
  run.labels.assign(static_cast<std::size_t>(n), 0);
  double previous = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < std::max<std::size_t>(opt.max_iter, 1); ++iter) {
    // Assignment, ties to the lowest centroid index.
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      Index arg = 0;
      for (Index c = 0; c < k; ++c) {
        const double d = squared_distance(points, i, centroids, c);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      run.labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
      dist[static_cast<std::size_t>(i)] = best;
    }

    // Empty clusters take the point farthest from its centroid.
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (auto l : run.labels) ++counts[l];
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < dist.size(); ++i) {
        if (counts[run.labels[i]] > 1 && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      --counts[run.labels[far]];
      run.labels[far] = static_cast<std::size_t>(c);
      counts[static_cast<std::size_t>(c)] = 1;
      dist[far] = 0.0;
    }

    // Update.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
    for (Index i = 0; i < n; ++i) sums.col(static_cast<Index>(run.labels[static_cast<std::size_t>(i)])) += points.col(i);
    for (Index c = 0; c < k; ++c) {
      centroids.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }

    const double inertia = compute_inertia(points, run.labels, centroids);
    run.history.push_back(inertia);
    const bool converged =
        std::isfinite(previous) && (previous - inertia) <= opt.tol * std::max(previous, 1e-300);
    previous = inertia;
    if (converged || inertia == 0.0) break;
  }
  run.centroids = std::move(centroids);
  run.inertia = run.history.back();
  return run;
}

}  // namespace

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (auto l : labels) ++sizes[l];
  return sizes;
}

Eigen::MatrixXd kmeans_pp_init(const PointMatrix& points, std::size_t k, std::uint64_t seed) {
  check_k(points, k);
  const auto n = static_cast<std::size_t>(points.cols());
  std::mt19937_64 rng(splitmix64(seed));
  Eigen::MatrixXd centroids(points.rows(), static_cast<Index>(k));

  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t chosen = first(rng);
  centroids.col(0) = points.col(static_cast<Index>(chosen));

  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points, static_cast<Index>(i), centroids, 0);

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : nearest) total += d;
    if (total > 0.0) {
      chosen = sample_weighted(nearest, total, rng);
    } else {
      // Every point coincides with a centroid already: fall back to uniform.
      chosen = first(rng);
    }
    centroids.col(static_cast<Index>(c)) = points.col(static_cast<Index>(chosen));
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points, static_cast<Index>(i), centroids, static_cast<Index>(c)));
    }
  }
  return centroids;
}

double compute_inertia(const PointMatrix& points, const std::vector<std::size_t>& labels,
                       const Eigen::MatrixXd& centroids) {
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum += squared_distance(points, static_cast<Index>(i), centroids, static_cast<Index>(labels[i]));
  }
  return sum;
}

double largest_cluster_compactness(const PointMatrix& points, const ClusterAssignment& a) {
  if (a.largest_cluster.empty()) return 0.0;
  const Index label = static_cast<Index>(a.labels[a.largest_cluster.front()]);
  double sum = 0.0;
  for (auto i : a.largest_cluster) {
    sum += std::sqrt(squared_distance(points, static_cast<Index>(i), a.centroids, label));
  }
  return sum / static_cast<double>(a.largest_cluster.size());
}

ClusterAssignment kmeans(const PointMatrix& points, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& options) {
  check_k(points, k);
  const std::size_t n_init = std::max<std::size_t>(options.n_init, 1);
  RunResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t run = 0; run < n_init; ++run) {
    const std::uint64_t run_seed = hash_key(seed, run);
    RunResult r = lloyd(points, kmeans_pp_init(points, k, run_seed), options);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  ClusterAssignment a;
  a.k = k;
  a.labels = std::move(best.labels);
  a.centroids = std::move(best.centroids);
  a.inertia = best.inertia;
  a.inertia_history = std::move(best.history);
  finalize_largest(points, a);
  return a;
}

KSelection select_k(const PointMatrix& points, std::size_t k_min, std::size_t k_max,
                    std::uint64_t seed, const KMeansOptions& options) {
  if (k_min < 1 || k_min > k_max) throw std::invalid_argument("select_k: need 1 <= k_min <= k_max");
  check_k(points, k_max);
  KSelection sel;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = k_min; k <= k_max; ++k) {
    ClusterAssignment a = kmeans(points, k, seed, options);
    const double criterion = a.mean_centroid_distance_largest;
    sel.k_values.push_back(k);
    sel.criteria.push_back(criterion);
    if (criterion < best) {
      best = criterion;
      sel.k_star = k;
      sel.assignment = std::move(a);
    }
  }
  return sel;
}

std::vector<std::size_t> expand_to_readouts(const ClusterAssignment& assignment,
                                            const RadialTrajectory& traj, bool include_si) {
  if (assignment.labels.size() != traj.n_interleaves) {
    throw std::invalid_argument("expand_to_readouts: labels do not cover the trajectory's interleaves");
  }
  std::vector<std::size_t> spokes;
  spokes.reserve(assignment.largest_cluster.size() * traj.n_readouts);
  for (auto il : assignment.largest_cluster) {
    for (std::size_t r = 0; r < traj.n_readouts; ++r) {
      if (!include_si && r == traj.si_index) continue;
      spokes.push_back(traj.spoke_index(il, r));
    }
  }
  return spokes;
}

}  // namespace simba
