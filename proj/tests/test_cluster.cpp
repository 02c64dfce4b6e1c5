#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "simba/cluster.hpp"
#include "simba/trajectory.hpp"

using namespace simba;

namespace {

// Clouds on a 4D lattice; cloud c has 20 + c points and spread sigma_c.
PointMatrix clouds(std::size_t n_clouds, std::uint64_t seed, std::vector<std::size_t>* truth = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Eigen::VectorXd> pts;
  for (std::size_t c = 0; c < n_clouds; ++c) {
    Eigen::VectorXd center(4);
    center << 40.0 * static_cast<double>(c % 3), 40.0 * static_cast<double>((c / 3) % 2),
        40.0 * static_cast<double>(c / 6), 0.0;
    const double sigma = 0.5 + 0.1 * static_cast<double>(n_clouds - c);
    for (std::size_t i = 0; i < 20 + c; ++i) {
      Eigen::VectorXd p(4);
      for (int d = 0; d < 4; ++d) p(d) = center(d) + sigma * g(rng);
      pts.push_back(p);
      if (truth) truth->push_back(c);
    }
  }
  PointMatrix m(4, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[i];
  return m;
}

// Same partition up to relabelling.
bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) return false;
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < a.size(); ++i) pairs.insert({a[i], b[i]});
  std::set<std::size_t> la(a.begin(), a.end()), lb(b.begin(), b.end());
  return pairs.size() == la.size() && pairs.size() == lb.size();
}

}  // namespace

TEST_SUITE("cluster") {

TEST_CASE("Lloyd iterations never increase the inertia") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  PointMatrix p(5, 300);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = g(rng);
  for (std::size_t k : {2u, 7u, 13u}) {
    KMeansOptions opt;
    opt.n_init = 3;
    const auto a = kmeans(p, k, 11, opt);
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
      CHECK(a.inertia_history[i] <= a.inertia_history[i - 1] * (1.0 + 1e-12));
    }
    CHECK(a.inertia == a.inertia_history.back());
    CHECK(compute_inertia(p, a.labels, a.centroids) == doctest::Approx(a.inertia));
    CHECK(largest_cluster_compactness(p, a) == a.mean_centroid_distance_largest);
    const auto sizes = a.cluster_sizes();
    CHECK(a.largest_cluster.size() == *std::max_element(sizes.begin(), sizes.end()));
    for (auto s : sizes) CHECK(s > 0);
  }
}

TEST_CASE("same seed, same answer") {
  const auto p = clouds(12, 3);
  const auto a = kmeans(p, 12, 42);
  const auto b = kmeans(p, 12, 42);
  CHECK(a.labels == b.labels);
  CHECK(a.centroids == b.centroids);
  const auto sa = select_k(p, 10, 14, 7);
  const auto sb = select_k(p, 10, 14, 7);
  CHECK(sa.k_star == sb.k_star);
  CHECK(sa.criteria == sb.criteria);
}

TEST_CASE("separated clouds are recovered and invariant to translation and scale") {
  std::vector<std::size_t> truth;
  const auto p = clouds(12, 4, &truth);
  const auto a = kmeans(p, 12, 1);
  CHECK(same_partition(a.labels, truth));

  PointMatrix moved = (p * 3.5).colwise() + Eigen::Vector4d(100.0, -20.0, 5.0, 1e3);
  const auto b = kmeans(moved, 12, 1);
  CHECK(a.labels == b.labels);
  CHECK(b.inertia == doctest::Approx(a.inertia * 3.5 * 3.5).epsilon(1e-9));
}

TEST_CASE("k selection finds the number of clouds") {
  const auto p = clouds(12, 5);
  const auto sel = select_k(p, 10, 14, 3);
  CHECK(sel.k_star == 12);
  REQUIRE(sel.k_values == std::vector<std::size_t>{10, 11, 12, 13, 14});
  CHECK(sel.criteria[2] < sel.criteria[0]);
  CHECK(sel.criteria[2] < sel.criteria[1]);
  for (double c : sel.criteria) CHECK(c >= sel.criteria[2]);
  // Criterion is the mean centroid distance of the largest cluster.
  CHECK(sel.criteria[2] == doctest::Approx(largest_cluster_compactness(p, sel.assignment)));
  CHECK(sel.assignment.k == 12);
}

TEST_CASE("one point per cluster gives a zero criterion") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  PointMatrix p(3, 14);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = g(rng);
  const auto sel = select_k(p, 10, 14, 0);
  CHECK(sel.k_star == 14);
  CHECK(sel.criteria.back() == 0.0);
  for (std::size_t i = 0; i + 1 < sel.criteria.size(); ++i) CHECK(sel.criteria[i] > 0.0);
}

TEST_CASE("duplicate points still give non-empty clusters") {
  PointMatrix p(2, 6);
  p << 0, 0, 0, 0, 5, 9,
       0, 0, 0, 0, 1, 2;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = kmeans(p, 4, seed);
    for (auto s : a.cluster_sizes()) CHECK(s > 0);
    CHECK(a.inertia == 0.0);
  }
  CHECK_THROWS_AS(kmeans(p, 7, 0), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(p, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(select_k(p, 5, 4, 0), std::invalid_argument);
}

TEST_CASE("k-means++ seeds are data points") {
  const auto p = clouds(6, 8);
  const auto c = kmeans_pp_init(p, 6, 77);
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    bool found = false;
    for (Eigen::Index i = 0; i < p.cols() && !found; ++i) found = p.col(i) == c.col(j);
    CHECK(found);
  }
}

TEST_CASE("largest cluster expands to its imaging readouts") {
  const auto traj = generate_phyllotaxis(652, 22, 8, 0.004);
  ClusterAssignment all;
  all.k = 1;
  all.labels.assign(652, 0);
  for (std::size_t i = 0; i < 652; ++i) all.largest_cluster.push_back(i);
  const auto spokes = expand_to_readouts(all, traj);
  CHECK(spokes.size() == 652 * 21);
  for (auto s : spokes) CHECK_FALSE(traj.is_si(s));
  CHECK(expand_to_readouts(all, traj, true).size() == 652 * 22);

  ClusterAssignment one;
  one.k = 2;
  one.labels.assign(652, 0);
  one.labels[17] = 1;
  one.largest_cluster = {17};
  const auto single = expand_to_readouts(one, traj);
  REQUIRE(single.size() == 21);
  for (std::size_t r = 0; r < 21; ++r) CHECK(single[r] == traj.spoke_index(17, r + 1));

  one.labels.pop_back();
  CHECK_THROWS_AS(expand_to_readouts(one, traj), std::invalid_argument);
}

}
