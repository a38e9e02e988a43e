#include "megdict/classifier.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "megdict/errors.hpp"
#include "megdict/head_model.hpp"

namespace megdict {
namespace {

// Gain with one dominant direction per region plus small in-region spread,
// so groups are well separated and compression keeps them apart.
Eigen::MatrixXd clustered_gain(int m, int per_region, int n_regions,
                               std::vector<int>* region_of, unsigned seed) {
  std::srand(seed);
  Eigen::MatrixXd gain(m, per_region * n_regions);
  region_of->clear();
  for (int l = 0; l < n_regions; ++l) {
    const Eigen::VectorXd center = Eigen::VectorXd::Random(m).normalized();
    for (int j = 0; j < per_region; ++j) {
      gain.col(l * per_region + j) =
          center + 0.05 * Eigen::VectorXd::Random(m);
      region_of->push_back(l);
    }
  }
  return gain;
}

struct Fixture {
  Dictionary dict;
  CompressedDictionary comp;
  DceModel dce;
  StructuralCovariance priors;
  ClassifierConfig cfg;

  ArtifactBundle bundle() const {
    return ArtifactBundle{&dict, &comp, &dce, &priors};
  }
};

Fixture make_fixture(int m, int per_region, int n_regions, double tau,
                     double delta, unsigned seed) {
  Fixture f;
  std::vector<int> region_of;
  const Eigen::MatrixXd gain =
      clustered_gain(m, per_region, n_regions, &region_of, seed);
  f.dict = build_dictionary(gain, region_of, n_regions);
  f.comp = compress(f.dict, tau);
  f.dce = estimate_dce(f.dict, f.comp, delta);
  f.priors = build_structural_covariances(f.comp, 1e-3);
  return f;
}

TEST(Deflation, StrictlyAboveScaledMax) {
  Eigen::VectorXd theta(4);
  theta << 1.0, 0.004, 0.006, 0.005;
  // Cutoff is 0.005 exactly; equality does not survive.
  EXPECT_EQ(deflation_set(theta, 0.005), (std::vector<int>{0, 2}));
}

TEST(Deflation, MonotoneInThreshold) {
  std::srand(3);
  const Eigen::VectorXd theta = Eigen::VectorXd::Random(20).cwiseAbs();
  std::vector<int> prev = deflation_set(theta, 1e-6);
  for (double p : {1e-3, 1e-2, 0.1, 0.5, 0.9}) {
    const std::vector<int> cur = deflation_set(theta, p);
    EXPECT_TRUE(std::includes(prev.begin(), prev.end(), cur.begin(),
                              cur.end()));
    prev = cur;
  }
}

TEST(Deflation, NearOneKeepsArgmaxOnly) {
  Eigen::VectorXd theta(5);
  theta << 0.2, 0.9, 0.1, 0.89, 0.3;
  EXPECT_EQ(deflation_set(theta, 0.999), (std::vector<int>{1}));
}

TEST(Deflation, RejectsThresholdOutsideOpenInterval) {
  Eigen::VectorXd theta = Eigen::VectorXd::Ones(3);
  EXPECT_THROW(deflation_set(theta, 0.0), ConfigError);
  EXPECT_THROW(deflation_set(theta, 1.0), ConfigError);
  EXPECT_THROW(deflation_set(theta, -0.1), ConfigError);
}

TEST(Deflate, CopiesRetainedGroupsInOrder) {
  const Fixture f = make_fixture(12, 3, 4, 0.3, 1e-2, 7);
  const DeflatedDictionary defl = deflate(f.dict, {0, 2});
  ASSERT_EQ(defl.atoms.cols(), 6);
  EXPECT_EQ(defl.atoms.leftCols(3), f.dict.group_view(0));
  EXPECT_EQ(defl.atoms.rightCols(3), f.dict.group_view(2));
  EXPECT_EQ(defl.atom_region, (std::vector<int>{0, 0, 0, 2, 2, 2}));
  for (int j = 0; j < 6; ++j) {
    const int l = defl.atom_region[j];
    const int within = j < 3 ? j : j - 3;
    EXPECT_EQ(defl.atom_dipole[j],
              f.dict.col_to_dipole[f.dict.group_offset[l] + within]);
  }
}

TEST(Phase1, SelectsTheGeneratingGroup) {
  const Fixture f = make_fixture(16, 4, 5, 0.3, 1e-2, 11);
  for (int target = 0; target < 5; ++target) {
    const Eigen::VectorXd y =
        f.dict.group_view(target).rowwise().sum().normalized();
    const auto [theta, z] = phase1(y, f.comp, f.dce, f.priors, f.cfg);
    ASSERT_EQ(theta.size(), 5);
    int argmax = 0;
    for (int l = 1; l < 5; ++l)
      if (theta[l] > theta[argmax]) argmax = l;
    EXPECT_EQ(argmax, target);
  }
}

TEST(Phase1, QueryOrthogonalToFeaturesLeavesPriorScaleTheta) {
  // Lossless compression so the error model vanishes and whitening reduces
  // to a scalar; only then does plain orthogonality to the feature span
  // survive the whitened regression.
  const Fixture f = make_fixture(14, 3, 4, 1e-12, 1e-1, 13);
  // Strip the feature-span component (blocks are oblique across groups, so
  // project by least squares); what is left has no explanation in the
  // dictionary, so every variance settles at its zero-budget value.
  std::srand(17);
  Eigen::VectorXd y = Eigen::VectorXd::Random(14);
  y -= f.comp.W * f.comp.W.completeOrthogonalDecomposition().solve(y);
  y.normalize();

  const auto [theta, z] = phase1(y, f.comp, f.dce, f.priors, f.cfg);
  // Hybrid schedule ends in the square-root regime: theta* = 4 kappa^2
  // vartheta at zero budget.
  const double want = 4.0 * f.cfg.eta_bar * f.cfg.eta_bar * f.cfg.vartheta_bar;
  for (int l = 0; l < theta.size(); ++l)
    EXPECT_NEAR(theta[l], want, 1e-9 * want);
  EXPECT_LE(z.norm(), 1e-9);
}

TEST(Phase2, SingleRegionAlwaysWins) {
  const Fixture f = make_fixture(12, 3, 4, 0.3, 1e-2, 19);
  const DeflatedDictionary defl = deflate(f.dict, {2});
  const Eigen::VectorXd y = f.dict.group_view(2).col(0);
  for (WinnerRule rule : {WinnerRule::region_sum, WinnerRule::max_atom}) {
    ClassifierConfig cfg = f.cfg;
    cfg.winner_rule = rule;
    EXPECT_EQ(phase2(y, defl, 1e-2, cfg).winner, 2);
  }
}

TEST(Phase2, AgreesWithResidualOracleOnSeparatedRegions) {
  const Fixture f = make_fixture(16, 3, 4, 0.3, 1e-2, 23);
  // Verify the fixture is actually separated: cross-region coherence < 0.9.
  for (int a = 0; a < f.dict.n_atoms(); ++a)
    for (int b = 0; b < f.dict.n_atoms(); ++b)
      if (f.dict.region_of_col[a] != f.dict.region_of_col[b])
        ASSERT_LT(std::abs(f.dict.atoms.col(a).dot(f.dict.atoms.col(b))),
                  0.9);

  const DeflatedDictionary defl = deflate(f.dict, {0, 1, 2, 3});
  std::srand(29);
  for (int target = 0; target < 4; ++target) {
    const Eigen::VectorXd y =
        (f.dict.group_view(target) * Eigen::VectorXd::Random(3).cwiseAbs())
            .normalized();
    const Phase2Result res = phase2(y, defl, 1e-2, f.cfg);

    // Independent route: least-squares residual per candidate region.
    int best = -1;
    double best_res = std::numeric_limits<double>::infinity();
    for (int l = 0; l < 4; ++l) {
      const auto block = f.dict.group_view(l);
      const Eigen::VectorXd fit =
          block.colPivHouseholderQr().solve(y);
      const double r = (block * fit - y).norm();
      if (r < best_res) {
        best_res = r;
        best = l;
      }
    }
    EXPECT_EQ(best, target);
    EXPECT_EQ(res.winner, target);
  }
}

TEST(Phase2, EmptyDictionaryOrBadDeltaRejected) {
  const Fixture f = make_fixture(10, 2, 3, 0.3, 1e-2, 31);
  const DeflatedDictionary empty;
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(10).normalized();
  EXPECT_THROW(phase2(y, empty, 1e-2, f.cfg), ConfigError);
  const DeflatedDictionary defl = deflate(f.dict, {0});
  EXPECT_THROW(phase2(y, defl, 0.0, f.cfg), ConfigError);
  EXPECT_THROW(phase2(y, defl, -1.0, f.cfg), ConfigError);
}

TEST(Classify, WinnerAlwaysInsideDeflationSet) {
  const Fixture f = make_fixture(16, 4, 5, 0.3, 1e-2, 37);
  std::srand(41);
  for (int t = 0; t < 5; ++t) {
    const Eigen::VectorXd y = Eigen::VectorXd::Random(16).normalized();
    const ClassificationOutcome out = classify(y, f.bundle(), 1e-2, f.cfg);
    EXPECT_TRUE(std::binary_search(out.deflation_set.begin(),
                                   out.deflation_set.end(),
                                   out.phase1_winner));
    EXPECT_TRUE(std::binary_search(out.deflation_set.begin(),
                                   out.deflation_set.end(),
                                   out.phase2_winner));
    ASSERT_EQ(out.phase2_x.size(), static_cast<int>(out.atom_region.size()));
    for (std::size_t j = 0; j < out.atom_region.size(); ++j)
      EXPECT_TRUE(std::binary_search(out.deflation_set.begin(),
                                     out.deflation_set.end(),
                                     out.atom_region[j]));
  }
}

TEST(Classify, DeterministicForIdenticalQueries) {
  const Fixture f = make_fixture(14, 3, 4, 0.3, 1e-2, 43);
  std::srand(47);
  const Eigen::VectorXd y = Eigen::VectorXd::Random(14).normalized();
  const ClassificationOutcome a = classify(y, f.bundle(), 5e-3, f.cfg);
  const ClassificationOutcome b = classify(y, f.bundle(), 5e-3, f.cfg);
  EXPECT_EQ(a.phase1_theta, b.phase1_theta);
  EXPECT_EQ(a.phase1_z, b.phase1_z);
  EXPECT_EQ(a.deflation_set, b.deflation_set);
  EXPECT_EQ(a.phase2_x, b.phase2_x);
  EXPECT_EQ(a.phase2_theta, b.phase2_theta);
  EXPECT_EQ(a.phase1_winner, b.phase1_winner);
  EXPECT_EQ(a.phase2_winner, b.phase2_winner);
}

TEST(Classify, RecoversRegionsOnPhysicalHead) {
  // End-to-end smoke on a real forward model, noiseless.
  const GeometryConfig geom;
  const SourceSpace space = build_source_space(64, 8, geom, 5);
  const SensorArray sensors = build_sensors(32, geom);
  Fixture f;
  f.dict = build_dictionary(space, sensors);
  f.comp = compress(f.dict, 0.3);
  f.dce = estimate_dce(f.dict, f.comp, 1e-3);
  f.priors = build_structural_covariances(f.comp, 1e-3);

  int correct1 = 0, correct2 = 0;
  for (int region = 0; region < 8; ++region) {
    Rng rng(trial_seed(123, region, 0, 0));
    const Activation act = simulate_patch(space, region, rng);
    const Measurement meas = measure(space, sensors, act, 0.0, rng);
    const ClassificationOutcome out =
        classify(meas.y, f.bundle(), 1e-3, f.cfg);
    correct1 += out.phase1_winner == region;
    correct2 += out.phase2_winner == region;
    EXPECT_FALSE(out.deflation_set.empty());
  }
  EXPECT_GE(correct1, 6);
  EXPECT_GE(correct2, 6);
}

}  // namespace
}  // namespace megdict
