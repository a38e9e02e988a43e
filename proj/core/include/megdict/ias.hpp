#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "megdict/structural_prior.hpp"

namespace megdict {

enum class ZMethod {
  stacked_qr,  // orthogonal factorization of [A S^{1/2}; I]
  normal_eq,   // SPD solve of (A^T A + S^{-1}) z = A^T b
};

// Group-sparse MAP problem: minimize over (z, theta)
//   1/2 ||A z - b||^2 + sum_u ||z_u||^2_u / (2 theta_u)
//     + sum_u (theta_u / vartheta_u)^r + sum_u kappa_u log theta_u
// where ||.||_u is the Mahalanobis norm of the unit's structural prior
// (identity when `priors` is null, e.g. for scalar units).
struct IasProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<int> unit_dims;
  const StructuralCovariance* priors = nullptr;
  HyperModel hyper;

  int n_units() const { return static_cast<int>(unit_dims.size()); }
};

struct IasSchedule {
  int max_iter_r1 = 150;
  int max_iter_rhalf = 0;  // 0: stay in the r = 1 regime
  double tol = 1e-4;       // max relative theta change
  ZMethod z_method = ZMethod::stacked_qr;
  const Eigen::VectorXd* theta0 = nullptr;  // optional initial theta override
  std::ostream* trace = nullptr;  // optional per-iteration CSV
};

struct IasResult {
  Eigen::VectorXd z;
  Eigen::VectorXd theta;
  int iters_r1 = 0;
  int iters_rhalf = 0;
  bool converged_r1 = false;
  bool converged_rhalf = false;
  std::vector<double> objective_trace;  // one entry per iteration
  int rhalf_start = -1;  // index into the trace where r = 1/2 begins
};

// Alternating minimization from theta0 = vartheta. When max_iter_rhalf > 0
// the solver re-derives the hyperparameters for r = 1/2 (same sensitivity)
// and continues from the r = 1 warm start.
IasResult solve(const IasProblem& problem, const IasSchedule& schedule);

// z-step: minimizes 1/2||Az - b||^2 + 1/2 z^T S^{-1} z with
// S = blockdiag(theta_u G_u).
Eigen::VectorXd update_z(const IasProblem& problem,
                         const Eigen::VectorXd& theta,
                         ZMethod method = ZMethod::stacked_qr);

// theta-step for one unit given c = ||z_u||^2_u. Closed form for r = 1;
// safeguarded Newton on log(theta) for r = 1/2. Floored at 1e-12*vartheta.
double update_theta(double c, double r, double vartheta, double kappa);

// Full objective value; the solver's descent property is asserted on this.
double objective(const IasProblem& problem, const Eigen::VectorXd& z,
                 const Eigen::VectorXd& theta);

}  // namespace megdict
