#pragma once

#include <Eigen/Dense>
#include <vector>

#include "megdict/compression.hpp"
#include "megdict/dictionary.hpp"
#include "megdict/ias.hpp"
#include "megdict/structural_prior.hpp"

namespace megdict {

enum class WinnerRule {
  region_sum,  // region with the largest summed atom variance
  max_atom,    // region owning the single atom of maximal variance
};

// Everything trial-independent, shared read-only across workers.
struct ArtifactBundle {
  const Dictionary* dict = nullptr;
  const CompressedDictionary* comp = nullptr;
  const DceModel* dce = nullptr;
  const StructuralCovariance* priors = nullptr;
};

struct ClassifierConfig {
  double deflation_p = 0.005;
  double eta_bar = 1e-3;
  double vartheta_bar = 1e-2;
  double phase2_theta_scale = 10.0;  // phase-II scale = this * vartheta * d^2
  WinnerRule winner_rule = WinnerRule::region_sum;
  IasSchedule phase1_schedule{150, 150, 1e-4, ZMethod::stacked_qr};
  IasSchedule phase2_schedule{150, 0, 1e-4, ZMethod::stacked_qr};
};

struct ClassificationOutcome {
  Eigen::VectorXd phase1_theta;    // per region
  Eigen::VectorXd phase1_z;        // stacked feature coefficients
  int phase1_winner = -1;
  std::vector<int> deflation_set;  // ascending region indices
  Eigen::VectorXd phase2_x;        // per retained atom
  Eigen::VectorXd phase2_theta;
  int phase2_winner = -1;
  std::vector<int> atom_region;    // retained atom -> region
  std::vector<int> atom_dipole;    // retained atom -> original dipole
};

// Group-sparse coding of the whitened query on the stacked features.
// Returns per-region variances and the stacked coefficient vector.
std::pair<Eigen::VectorXd, Eigen::VectorXd> phase1(
    const Eigen::VectorXd& y, const CompressedDictionary& comp,
    const DceModel& dce, const StructuralCovariance& priors,
    const ClassifierConfig& cfg);

// Regions with theta strictly above p * max(theta), in ascending order.
std::vector<int> deflation_set(const Eigen::VectorXd& theta, double p);

// Full-resolution atoms of the retained regions, with provenance maps.
struct DeflatedDictionary {
  Eigen::MatrixXd atoms;
  std::vector<int> atom_region;
  std::vector<int> atom_dipole;
};
DeflatedDictionary deflate(const Dictionary& dict,
                           const std::vector<int>& retained);

// Scalar sparse coding on the deflated dictionary; winner per `rule`.
struct Phase2Result {
  Eigen::VectorXd x;
  Eigen::VectorXd theta;
  int winner = -1;
};
Phase2Result phase2(const Eigen::VectorXd& y, const DeflatedDictionary& defl,
                    double delta, const ClassifierConfig& cfg);

// Both phases composed; delta is the per-query noise scale.
ClassificationOutcome classify(const Eigen::VectorXd& y,
                               const ArtifactBundle& artifacts, double delta,
                               const ClassifierConfig& cfg);

}  // namespace megdict
