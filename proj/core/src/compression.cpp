#include "megdict/compression.hpp"

#include <Eigen/SVD>
#include <string>

#include "megdict/errors.hpp"

namespace megdict {

CompressedDictionary compress(const Dictionary& dict, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must be in (0, 1)");
  const int L = dict.n_groups();
  const int m = dict.n_channels();

  CompressedDictionary comp;
  comp.tau = tau;
  comp.W_blocks.resize(L);
  comp.H_blocks.resize(L);
  comp.singular_values.resize(L);
  comp.ranks.resize(L);

  int total_rank = 0;
  for (int l = 0; l < L; ++l) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        dict.group_view(l), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    if (!sigma.allFinite())
      throw NumericalError("SVD failed on group " + std::to_string(l));
    // Unit-norm atoms guarantee sigma_1 >= 1/sqrt(n_l) > 0.
    int rank = 0;
    for (int j = 0; j < sigma.size(); ++j)
      if (sigma[j] >= tau * sigma[0]) ++rank;
    rank = std::max(rank, 1);

    comp.singular_values[l] = sigma;
    comp.ranks[l] = rank;
    comp.W_blocks[l] = svd.matrixU().leftCols(rank);
    comp.H_blocks[l] = sigma.head(rank).asDiagonal() *
                       svd.matrixV().leftCols(rank).transpose();
    total_rank += rank;
  }

  comp.W.resize(m, total_rank);
  int off = 0;
  for (int l = 0; l < L; ++l) {
    comp.W.middleCols(off, comp.ranks[l]) = comp.W_blocks[l];
    off += comp.ranks[l];
  }
  return comp;
}

DceModel estimate_dce(const Dictionary& dict,
                      const CompressedDictionary& comp, double delta) {
  const int n = dict.n_atoms();
  const int m = dict.n_channels();
  if (n < 2) throw ConfigError("need at least 2 atoms to estimate the DCE");
  if (delta < 0.0) throw ConfigError("delta must be >= 0");

  // Each atom's compressed representation lives on its own group's features
  // (the coding matrix is block diagonal), so the error sample is the
  // per-group truncation residual — not a fit on the stacked features, which
  // usually span the whole channel space and would leave nothing to model.
  Eigen::MatrixXd residual(m, n);
  for (int l = 0; l < comp.n_groups(); ++l)
    residual.middleCols(dict.group_offset[l], dict.group_size[l]) =
        dict.group_view(l) - comp.W_blocks[l] * comp.H_blocks[l];

  DceModel dce;
  dce.delta = delta;
  dce.mean = residual.rowwise().mean();
  residual.colwise() -= dce.mean;
  dce.covariance = residual * residual.transpose() / double(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dce.covariance);
  if (eig.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of the DCE covariance failed");
  dce.eigvecs = eig.eigenvectors();
  dce.eigvals = eig.eigenvalues().cwiseMax(0.0);

  if (delta == 0.0) {
    const double max_ev = dce.eigvals.maxCoeff();
    if (dce.eigvals.minCoeff() <= 1e-14 * max_ev || max_ev == 0.0)
      throw ConfigError(
          "compression-error covariance is singular; delta must be > 0");
  }
  return dce;
}

Whitener DceModel::whitener_for(double delta_value) const {
  Whitener w;
  w.delta = delta_value;
  w.basis = eigvecs;
  Eigen::VectorXd ev =
      (eigvals.array() + delta_value * delta_value).matrix();
  const double floor = 1e-14 * ev.maxCoeff();
  w.inv_sqrt = ev.cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return w;
}

}  // namespace megdict
