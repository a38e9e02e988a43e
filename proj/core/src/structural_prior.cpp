#include "megdict/structural_prior.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "megdict/errors.hpp"

namespace megdict {

StructuralCovariance build_structural_covariances(
    const CompressedDictionary& comp, double eps) {
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  StructuralCovariance prior;
  prior.eps = eps;
  prior.groups.resize(comp.n_groups());

  for (int l = 0; l < comp.n_groups(); ++l) {
    GroupPrior& gp = prior.groups[l];
    const Eigen::MatrixXd& H = comp.H_blocks[l];
    const int r = static_cast<int>(H.rows());

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinU);
    gp.lambda = svd.singularValues();
    gp.Q = svd.matrixU();

    if (gp.lambda.size() == 0 || gp.lambda[0] <= 0.0) {
      gp.degenerate = true;
      gp.G = Eigen::MatrixXd::Identity(r, r);
      gp.effective_rank = 0;
    } else {
      gp.effective_rank = 0;
      for (int j = 0; j < gp.lambda.size(); ++j)
        if (gp.lambda[j] > 1e-12 * gp.lambda[0]) ++gp.effective_rank;
      Eigen::VectorXd w = gp.lambda / gp.lambda[0];
      gp.G = gp.Q * w.array().square().matrix().asDiagonal() *
                 gp.Q.transpose() +
             eps * Eigen::MatrixXd::Identity(r, r);
    }

    gp.chol.compute(gp.G);
    if (gp.chol.info() != Eigen::Success)
      throw NumericalError("structural covariance is not positive definite");
    gp.G_inv = gp.chol.solve(Eigen::MatrixXd::Identity(r, r));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gp.G);
    gp.G_sqrt = eig.eigenvectors() *
                eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                eig.eigenvectors().transpose();
  }
  return prior;
}

double mahalanobis_sq(const StructuralCovariance& prior, int l,
                      const Eigen::VectorXd& z) {
  if (l < 0 || l >= prior.n_groups())
    throw ConfigError("group index out of range");
  const GroupPrior& gp = prior.groups[l];
  if (z.size() != gp.G.rows()) throw ConfigError("coefficient dimension mismatch");
  return z.dot(gp.chol.solve(z));
}

HyperModel default_hypermodel(const std::vector<int>& dims, double r,
                              double eta_bar, double vartheta_bar) {
  if (!(eta_bar > 0.0)) throw ConfigError("eta_bar must be > 0");
  if (!(vartheta_bar > 0.0)) throw ConfigError("vartheta_bar must be > 0");
  HyperModel hyper;
  hyper.r = r;
  hyper.dims = dims;
  const int u = static_cast<int>(dims.size());
  hyper.beta.resize(u);
  hyper.vartheta = Eigen::VectorXd::Constant(u, vartheta_bar);
  hyper.kappa = Eigen::VectorXd::Constant(u, -eta_bar);
  // kappa = dim/2 + 1 - r*beta = -eta_bar for every unit.
  for (int i = 0; i < u; ++i)
    hyper.beta[i] = (dims[i] / 2.0 + 1.0 + eta_bar) / r;
  return hyper;
}

HyperModel HyperModel::switched(double new_r) const {
  HyperModel out = *this;
  out.r = new_r;
  for (int i = 0; i < n_units(); ++i) {
    const double eta = -kappa[i];  // preserved sensitivity
    out.beta[i] = (dims[i] / 2.0 + 1.0 + eta) / new_r;
    out.kappa[i] = -eta;
  }
  return out;
}

}  // namespace megdict
