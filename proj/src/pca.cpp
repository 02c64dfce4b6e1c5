#include "simba/pca.hpp"

#include <algorithm>
#include <stdexcept>

namespace simba {

Eigen::MatrixXd center_rows(const Eigen::MatrixXd& s) {
  const Eigen::VectorXd mean = s.rowwise().mean();
  return s.colwise() - mean;
}

ReducedMatrix reduce(const Eigen::MatrixXd& s, std::size_t n_pc, bool discard_first) {
  const auto min_dim = static_cast<std::size_t>(std::min(s.rows(), s.cols()));
  if (min_dim == 0) throw std::invalid_argument("pca::reduce: empty matrix");
  if (discard_first && n_pc < 2) throw std::invalid_argument("pca::reduce: n_pc must be >= 2 when discarding");
  if (n_pc < 1) throw std::invalid_argument("pca::reduce: n_pc must be >= 1");

  ReducedMatrix out;
  std::size_t kept = n_pc;
  if (n_pc > min_dim) {
    // Fewer interleaves than requested components: degrade gracefully.
    if (static_cast<std::size_t>(s.cols()) < n_pc && static_cast<std::size_t>(s.rows()) >= n_pc) {
      kept = min_dim;
      out.warnings.push_back("pca: only " + std::to_string(min_dim) +
                             " components available, fewer than requested " + std::to_string(n_pc));
      if (discard_first && kept < 2) throw std::invalid_argument("pca::reduce: too few interleaves");
    } else {
      throw std::invalid_argument("pca::reduce: n_pc exceeds the matrix dimensions");
    }
  }

  const Eigen::MatrixXd centered = center_rows(s);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  Eigen::MatrixXd u = svd.matrixU().leftCols(static_cast<Eigen::Index>(kept));
  Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(kept));

  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index arg = 0;
    u.col(j).cwiseAbs().maxCoeff(&arg);
    if (u(arg, j) < 0.0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }

  const double total = sigma.squaredNorm();
  out.n_pc_total = kept;
  out.discarded_first = discard_first;
  out.components = u;
  for (std::size_t j = 0; j < kept; ++j) {
    const double sj = sigma(static_cast<Eigen::Index>(j));
    out.singular_values.push_back(sj);
    out.explained_variance.push_back(total > 0.0 ? sj * sj / total : 0.0);
  }

  const Eigen::Index first = discard_first ? 1 : 0;
  const Eigen::Index rows = static_cast<Eigen::Index>(kept) - first;
  out.data.resize(rows, s.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.data.row(r) = sigma(r + first) * v.col(r + first).transpose();
  }
  return out;
}

}  // namespace simba
