#include "megdict/classifier.hpp"

#include <cmath>
#include <map>

#include "megdict/errors.hpp"

namespace megdict {

std::pair<Eigen::VectorXd, Eigen::VectorXd> phase1(
    const Eigen::VectorXd& y, const CompressedDictionary& comp,
    const DceModel& dce, const StructuralCovariance& priors,
    const ClassifierConfig& cfg) {
  const Whitener wh = dce.whitener();
  IasProblem problem;
  problem.A = wh.apply(comp.W);
  problem.b = wh.apply(y - dce.mean);
  problem.unit_dims = comp.ranks;
  problem.priors = &priors;
  problem.hyper = default_hypermodel(comp.ranks, 1.0, cfg.eta_bar,
                                     cfg.vartheta_bar);
  const IasResult result = solve(problem, cfg.phase1_schedule);
  return {result.theta, result.z};
}

std::vector<int> deflation_set(const Eigen::VectorXd& theta, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("deflation p must be in (0, 1)");
  const double cutoff = p * theta.maxCoeff();
  std::vector<int> retained;
  for (int l = 0; l < theta.size(); ++l)
    if (theta[l] > cutoff) retained.push_back(l);  // strictly above
  return retained;
}

DeflatedDictionary deflate(const Dictionary& dict,
                           const std::vector<int>& retained) {
  int n_cols = 0;
  for (int l : retained) n_cols += dict.group_size[l];
  DeflatedDictionary defl;
  defl.atoms.resize(dict.atoms.rows(), n_cols);
  defl.atom_region.reserve(n_cols);
  defl.atom_dipole.reserve(n_cols);
  int col = 0;
  for (int l : retained) {
    defl.atoms.middleCols(col, dict.group_size[l]) = dict.group_view(l);
    for (int j = 0; j < dict.group_size[l]; ++j) {
      defl.atom_region.push_back(l);
      defl.atom_dipole.push_back(dict.col_to_dipole[dict.group_offset[l] + j]);
    }
    col += dict.group_size[l];
  }
  return defl;
}

Phase2Result phase2(const Eigen::VectorXd& y, const DeflatedDictionary& defl,
                    double delta, const ClassifierConfig& cfg) {
  const int n_atoms = static_cast<int>(defl.atoms.cols());
  if (n_atoms == 0) throw ConfigError("deflated dictionary is empty");
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");

  IasProblem problem;
  problem.A = defl.atoms / delta;
  problem.b = y / delta;
  problem.unit_dims.assign(n_atoms, 1);
  // The unwhitened system scales as 1/delta, so the prior variance scale is
  // re-expressed in the same units.
  const double vartheta2 =
      cfg.phase2_theta_scale * cfg.vartheta_bar * delta * delta;
  problem.hyper =
      default_hypermodel(problem.unit_dims, 1.0, cfg.eta_bar, vartheta2);

  const IasResult sol = solve(problem, cfg.phase2_schedule);

  Phase2Result result;
  result.x = sol.z;
  result.theta = sol.theta;

  if (cfg.winner_rule == WinnerRule::max_atom) {
    int best = 0;
    for (int j = 1; j < n_atoms; ++j)
      if (sol.theta[j] > sol.theta[best]) best = j;  // ties: lowest index
    result.winner = defl.atom_region[best];
  } else {
    std::map<int, double> per_region;
    for (int j = 0; j < n_atoms; ++j)
      per_region[defl.atom_region[j]] += sol.theta[j];
    result.winner = per_region.begin()->first;
    for (const auto& [region, total] : per_region)
      if (total > per_region[result.winner]) result.winner = region;
  }
  return result;
}

ClassificationOutcome classify(const Eigen::VectorXd& y,
                               const ArtifactBundle& artifacts, double delta,
                               const ClassifierConfig& cfg) {
  const DceModel trial_dce = [&] {
    DceModel d = *artifacts.dce;
    d.delta = delta;
    return d;
  }();

  ClassificationOutcome out;
  std::tie(out.phase1_theta, out.phase1_z) =
      phase1(y, *artifacts.comp, trial_dce, *artifacts.priors, cfg);
  out.phase1_winner = 0;
  for (int l = 1; l < out.phase1_theta.size(); ++l)
    if (out.phase1_theta[l] > out.phase1_theta[out.phase1_winner])
      out.phase1_winner = l;
  out.deflation_set = deflation_set(out.phase1_theta, cfg.deflation_p);

  const DeflatedDictionary defl = deflate(*artifacts.dict, out.deflation_set);
  const Phase2Result p2 = phase2(y, defl, delta, cfg);
  out.phase2_x = p2.x;
  out.phase2_theta = p2.theta;
  out.phase2_winner = p2.winner;
  out.atom_region = defl.atom_region;
  out.atom_dipole = defl.atom_dipole;
  return out;
}

}  // namespace megdict
