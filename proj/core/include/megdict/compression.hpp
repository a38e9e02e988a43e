#pragma once

#include <Eigen/Dense>
#include <vector>

#include "megdict/dictionary.hpp"

namespace megdict {

// Per-group truncated SVD factors D^(l) ~ W^(l) H^(l) and the stacked
// feature matrix W = [W^(1) ... W^(L)].
struct CompressedDictionary {
  std::vector<Eigen::MatrixXd> W_blocks;  // m x r_l, orthonormal columns
  std::vector<Eigen::MatrixXd> H_blocks;  // r_l x n_l
  std::vector<Eigen::VectorXd> singular_values;  // full spectrum per group
  std::vector<int> ranks;
  Eigen::MatrixXd W;  // m x R, R = sum r_l
  double tau = 0.0;

  int total_rank() const { return static_cast<int>(W.cols()); }
  int n_groups() const { return static_cast<int>(ranks.size()); }
  // First stacked-feature column of group l.
  int feature_offset(int l) const {
    int off = 0;
    for (int g = 0; g < l; ++g) off += ranks[g];
    return off;
  }
};

// Applies C^{-1/2} without materializing it (shared eigenbasis, per-delta
// inverse square-root spectrum).
struct Whitener {
  Eigen::MatrixXd basis;      // eigenvectors of C = C_dce + delta^2 I
  Eigen::VectorXd inv_sqrt;   // 1/sqrt(max(eigenvalue, floor))
  double delta = 0.0;

  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    return basis * (inv_sqrt.asDiagonal() * (basis.transpose() * x));
  }
  // Explicit symmetric C^{-1/2}; for diagnostics and tests.
  Eigen::MatrixXd materialize() const {
    return basis * inv_sqrt.asDiagonal() * basis.transpose();
  }
};

// Gaussian model of the dictionary compression error, plus the measurement
// noise floor delta: C = C_dce + delta^2 I.
struct DceModel {
  Eigen::VectorXd mean;        // m
  Eigen::MatrixXd covariance;  // m x m, PSD sample covariance of residuals
  double delta = 0.0;

  // Cached eigendecomposition of `covariance` (ascending eigenvalues).
  Eigen::MatrixXd eigvecs;
  Eigen::VectorXd eigvals;

  // Whitener for the stored delta.
  Whitener whitener() const { return whitener_for(delta); }
  // Whitener for a different noise scale, reusing the eigenbasis.
  Whitener whitener_for(double delta_value) const;
};

// Per-group thin SVD; rank r_l = #(sigma_j >= tau * sigma_1), at least 1.
CompressedDictionary compress(const Dictionary& dict, double tau);

// Minimum-norm least-squares fit of every atom on the stacked W; residual
// sample mean and covariance (1/(N-1) normalization).
DceModel estimate_dce(const Dictionary& dict,
                      const CompressedDictionary& comp, double delta);

}  // namespace megdict
