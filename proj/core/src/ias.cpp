#include "megdict/ias.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <ostream>
#include <string>

#include "megdict/errors.hpp"

namespace megdict {

namespace {

std::vector<int> unit_offsets(const std::vector<int>& dims) {
  std::vector<int> off(dims.size());
  int total = 0;
  for (std::size_t u = 0; u < dims.size(); ++u) {
    off[u] = total;
    total += dims[u];
  }
  return off;
}

void check_problem(const IasProblem& p) {
  int total = 0;
  for (int d : p.unit_dims) total += d;
  if (total != p.A.cols())
    throw ConfigError("unit dimensions do not sum to the column count");
  if (p.hyper.n_units() != p.n_units())
    throw ConfigError("hypermodel does not match the unit partition");
  if (p.priors && p.priors->n_groups() < p.n_units())
    throw ConfigError("structural prior does not cover all units");
}

const GroupPrior* unit_prior(const IasProblem& p, int u) {
  if (!p.priors) return nullptr;
  const GroupPrior& gp = p.priors->groups[u];
  return gp.G.rows() == p.unit_dims[u] ? &gp : nullptr;
}

// ||z_u||^2_u with the cached inverse (identity prior when absent).
double unit_c(const IasProblem& p, int u, int off,
              const Eigen::VectorXd& z) {
  const int d = p.unit_dims[u];
  const auto zu = z.segment(off, d);
  if (const GroupPrior* gp = unit_prior(p, u))
    return zu.dot(gp->G_inv * zu);
  return zu.squaredNorm();
}

double theta_floor(double vartheta) { return 1e-12 * vartheta; }

double update_theta_r1(double c, double vartheta, double kappa) {
  const double eta = -kappa;
  const double theta =
      0.5 * vartheta * (eta + std::sqrt(eta * eta + 2.0 * c / vartheta));
  return std::max(theta, theta_floor(vartheta));
}

// Minimizes phi(t) = (c/2) e^{-t} + e^{t/2}/sqrt(vartheta) + kappa t over
// t = log(theta); strictly convex, so safeguarded Newton with a bisection
// fallback always lands on the unique root of phi'.
double update_theta_rhalf(double c, double vartheta, double kappa) {
  const double floor = theta_floor(vartheta);
  const double inv_sqrt_vt = 1.0 / std::sqrt(vartheta);
  if (c == 0.0)
    return kappa < 0.0 ? std::max(4.0 * kappa * kappa * vartheta, floor)
                       : floor;

  const auto dphi = [&](double t) {
    return -0.5 * c * std::exp(-t) + 0.5 * inv_sqrt_vt * std::exp(0.5 * t) +
           kappa;
  };
  const auto ddphi = [&](double t) {
    return 0.5 * c * std::exp(-t) + 0.25 * inv_sqrt_vt * std::exp(0.5 * t);
  };

  double lo = std::log(floor);
  if (dphi(lo) >= 0.0) return floor;
  // Warm start near the r = 1 solution, then grow until bracketed.
  double hi = std::max(std::log(update_theta_r1(c, vartheta, kappa)), lo + 1.0);
  while (dphi(hi) < 0.0) hi += 2.0;

  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double d1 = dphi(t);
    if (d1 > 0.0)
      hi = t;
    else
      lo = t;
    double next = t - d1 / ddphi(t);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double dt = std::abs(next - t);
    t = next;
    if (dt < 1e-12 * std::max(1.0, std::abs(t))) break;
  }
  return std::max(std::exp(t), floor);
}

}  // namespace

double update_theta(double c, double r, double vartheta, double kappa) {
  if (c < 0.0) throw ConfigError("c must be >= 0");
  if (!(vartheta > 0.0)) throw ConfigError("vartheta must be > 0");
  if (r == 1.0) return update_theta_r1(c, vartheta, kappa);
  if (r == 0.5) return update_theta_rhalf(c, vartheta, kappa);
  throw ConfigError("unsupported exponent regime r");
}

double objective(const IasProblem& p, const Eigen::VectorXd& z,
                 const Eigen::VectorXd& theta) {
  const std::vector<int> off = unit_offsets(p.unit_dims);
  double value = 0.5 * (p.A * z - p.b).squaredNorm();
  for (int u = 0; u < p.n_units(); ++u) {
    const double c = unit_c(p, u, off[u], z);
    value += 0.5 * c / theta[u] +
             std::pow(theta[u] / p.hyper.vartheta[u], p.hyper.r) +
             p.hyper.kappa[u] * std::log(theta[u]);
  }
  return value;
}

namespace {

// Shared state for the z-step; the Gram matrix is iteration-independent.
struct ZWorkspace {
  Eigen::MatrixXd gram;  // A^T A (normal-equation route only)
  Eigen::VectorXd atb;
};

Eigen::VectorXd z_step(const IasProblem& p, const std::vector<int>& off,
                       const Eigen::VectorXd& theta, ZMethod method,
                       const ZWorkspace* ws) {
  const int R = static_cast<int>(p.A.cols());
  const int m = static_cast<int>(p.A.rows());

  if (method == ZMethod::normal_eq) {
    Eigen::MatrixXd M = ws ? ws->gram : (p.A.transpose() * p.A).eval();
    for (int u = 0; u < p.n_units(); ++u) {
      const int d = p.unit_dims[u];
      if (const GroupPrior* gp = unit_prior(p, u))
        M.block(off[u], off[u], d, d) += gp->G_inv / theta[u];
      else
        M.block(off[u], off[u], d, d).diagonal().array() += 1.0 / theta[u];
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("z-step factorization failed");
    return ldlt.solve(ws ? ws->atb : (p.A.transpose() * p.b).eval());
  }

  // Substitution w = S^{-1/2} z, S = blockdiag(theta_u G_u), then the
  // least-squares system [A S^{1/2}; I] w = [b; 0].
  Eigen::MatrixXd stacked(m + R, R);
  stacked.topRows(m) = p.A;
  for (int u = 0; u < p.n_units(); ++u) {
    const int d = p.unit_dims[u];
    const double s = std::sqrt(theta[u]);
    if (const GroupPrior* gp = unit_prior(p, u))
      stacked.topRows(m).middleCols(off[u], d) =
          (p.A.middleCols(off[u], d) * gp->G_sqrt) * s;
    else
      stacked.topRows(m).middleCols(off[u], d) *= s;
  }
  stacked.bottomRows(R).setIdentity();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + R);
  rhs.head(m) = p.b;
  Eigen::VectorXd w = stacked.householderQr().solve(rhs);
  if (!w.allFinite()) throw NumericalError("z-step factorization failed");

  Eigen::VectorXd z(R);
  for (int u = 0; u < p.n_units(); ++u) {
    const int d = p.unit_dims[u];
    const double s = std::sqrt(theta[u]);
    if (const GroupPrior* gp = unit_prior(p, u))
      z.segment(off[u], d) = s * (gp->G_sqrt * w.segment(off[u], d));
    else
      z.segment(off[u], d) = s * w.segment(off[u], d);
  }
  return z;
}

}  // namespace

Eigen::VectorXd update_z(const IasProblem& problem,
                         const Eigen::VectorXd& theta, ZMethod method) {
  check_problem(problem);
  if (theta.size() != problem.n_units())
    throw ConfigError("theta size does not match the unit count");
  if ((theta.array() <= 0.0).any())
    throw ConfigError("theta must be strictly positive");
  return z_step(problem, unit_offsets(problem.unit_dims), theta, method,
                nullptr);
}

IasResult solve(const IasProblem& problem, const IasSchedule& schedule) {
  check_problem(problem);
  const std::vector<int> off = unit_offsets(problem.unit_dims);
  const int n_units = problem.n_units();

  ZWorkspace ws;
  const ZWorkspace* ws_ptr = nullptr;
  if (schedule.z_method == ZMethod::normal_eq) {
    ws.gram = problem.A.transpose() * problem.A;
    ws.atb = problem.A.transpose() * problem.b;
    ws_ptr = &ws;
  }

  IasResult result;
  result.theta = schedule.theta0 ? *schedule.theta0 : problem.hyper.vartheta;
  if (result.theta.size() != n_units)
    throw ConfigError("theta0 size does not match the unit count");
  for (int u = 0; u < n_units; ++u)
    result.theta[u] =
        std::max(result.theta[u], theta_floor(problem.hyper.vartheta[u]));

  IasProblem regime = problem;  // hyper swapped at the regime switch
  Eigen::VectorXd c(n_units);

  const auto run_regime = [&](int max_iter, int& iters, bool& converged) {
    converged = false;
    for (iters = 0; iters < max_iter;) {
      result.z = z_step(regime, off, result.theta, schedule.z_method, ws_ptr);
      double rel_change = 0.0;
      for (int u = 0; u < n_units; ++u) {
        c[u] = unit_c(regime, u, off[u], result.z);
        const double next = update_theta(c[u], regime.hyper.r,
                                         regime.hyper.vartheta[u],
                                         regime.hyper.kappa[u]);
        rel_change =
            std::max(rel_change, std::abs(next - result.theta[u]) /
                                     result.theta[u]);
        result.theta[u] = next;
      }
      ++iters;
      const double value = objective(regime, result.z, result.theta);
      if (!std::isfinite(value))
        throw NumericalError("non-finite objective at iteration " +
                             std::to_string(result.objective_trace.size()));
      result.objective_trace.push_back(value);
      if (schedule.trace)
        *schedule.trace << result.objective_trace.size() << ','
                        << regime.hyper.r << ',' << value << ','
                        << result.theta.maxCoeff() << ',' << rel_change
                        << '\n';
      if (rel_change < schedule.tol) {
        converged = true;
        break;
      }
    }
  };

  run_regime(schedule.max_iter_r1, result.iters_r1, result.converged_r1);

  if (schedule.max_iter_rhalf > 0) {
    regime.hyper = problem.hyper.switched(0.5);
    result.rhalf_start = static_cast<int>(result.objective_trace.size());
    run_regime(schedule.max_iter_rhalf, result.iters_rhalf,
               result.converged_rhalf);
  }
  return result;
}

}  // namespace megdict
