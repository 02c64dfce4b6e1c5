#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace simba {

struct ReducedMatrix {
  Eigen::MatrixXd data;                     // n_kept x n_interleaves component scores
  Eigen::MatrixXd components;               // feature-space directions of all computed components
  std::vector<double> singular_values;      // of all computed components
  std::vector<double> explained_variance;   // fractions of total variance, all computed components
  std::size_t n_pc_total = 0;
  bool discarded_first = false;
  std::vector<std::string> warnings;
};

/// PCA of the reference matrix along the interleaf direction. Rows are
/// centered across interleaves, the thin SVD gives the leading n_pc
/// components, and each component is oriented so its largest-magnitude
/// entry is positive. Score row j is sigma_j v_j^T. Component 1 is dropped
/// when discard_first is set.
ReducedMatrix reduce(const Eigen::MatrixXd& s, std::size_t n_pc = 20, bool discard_first = true);

/// Row-centered copy of s.
Eigen::MatrixXd center_rows(const Eigen::MatrixXd& s);

}  // namespace simba
