#pragma once

#include <Eigen/Dense>
#include <vector>

#include "megdict/compression.hpp"

namespace megdict {

// SPD covariance shaping one group's coefficient prior: a cone along the
// group's dominant feature direction plus an eps ridge.
struct GroupPrior {
  Eigen::MatrixXd G;         // r_l x r_l SPD
  Eigen::LLT<Eigen::MatrixXd> chol;  // of G
  Eigen::MatrixXd G_inv;
  Eigen::MatrixXd G_sqrt;    // symmetric square root
  Eigen::VectorXd lambda;    // singular values of H^(l)
  Eigen::MatrixXd Q;         // corresponding left singular vectors
  int effective_rank = 0;    // singular values above 1e-12 * lambda_1
  bool degenerate = false;   // H was identically zero; G fell back to I
};

struct StructuralCovariance {
  std::vector<GroupPrior> groups;
  double eps = 0.0;

  int n_groups() const { return static_cast<int>(groups.size()); }
};

// G^(l) = sum_j (lambda_j/lambda_1)^2 q_j q_j^T + eps I from the SVD of
// H^(l).
StructuralCovariance build_structural_covariances(
    const CompressedDictionary& comp, double eps);

// ||z||^2_(l) = z^T (G^(l))^{-1} z.
double mahalanobis_sq(const StructuralCovariance& prior, int l,
                      const Eigen::VectorXd& z);

// Generalized-gamma hyperprior parameters, one unit per coefficient group
// (Phase I) or per scalar coefficient (Phase II).
struct HyperModel {
  double r = 1.0;                 // exponent regime: 1 or 0.5
  std::vector<int> dims;          // unit coefficient dimensions
  Eigen::VectorXd beta;           // shape per unit
  Eigen::VectorXd vartheta;       // scale per unit
  Eigen::VectorXd kappa;          // dim/2 + 1 - r*beta

  int n_units() const { return static_cast<int>(dims.size()); }
  // Same sensitivity eta = -kappa re-expressed in another exponent regime.
  HyperModel switched(double new_r) const;
};

// beta chosen so that kappa = -eta_bar < 0 in the given regime; vartheta
// constant across units.
HyperModel default_hypermodel(const std::vector<int>& dims, double r,
                              double eta_bar, double vartheta_bar);

}  // namespace megdict
