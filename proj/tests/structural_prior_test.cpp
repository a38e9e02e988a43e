#include "megdict/structural_prior.hpp"

#include <gtest/gtest.h>

namespace megdict {
namespace {

Dictionary make_dict(int m, const std::vector<int>& group_sizes,
                     unsigned seed) {
  std::srand(seed);
  Dictionary dict;
  int n = 0;
  for (int s : group_sizes) n += s;
  dict.atoms = Eigen::MatrixXd::Random(m, n);
  int col = 0;
  for (std::size_t l = 0; l < group_sizes.size(); ++l) {
    dict.group_offset.push_back(col);
    dict.group_size.push_back(group_sizes[l]);
    for (int j = 0; j < group_sizes[l]; ++j, ++col) {
      dict.atoms.col(col).normalize();
      dict.col_to_dipole.push_back(col);
      dict.region_of_col.push_back(static_cast<int>(l));
    }
  }
  return dict;
}

StructuralCovariance build_from(int m, const std::vector<int>& sizes,
                                double tau, double eps, unsigned seed,
                                CompressedDictionary* out_comp = nullptr) {
  const Dictionary dict = make_dict(m, sizes, seed);
  CompressedDictionary comp = compress(dict, tau);
  StructuralCovariance prior = build_structural_covariances(comp, eps);
  if (out_comp) *out_comp = std::move(comp);
  return prior;
}

TEST(StructuralPrior, EigenvaluesAreScaledSquaredSpectrumPlusRidge) {
  CompressedDictionary comp;
  const double eps = 1e-3;
  const StructuralCovariance prior =
      build_from(12, {6, 5}, 0.2, eps, 1, &comp);
  ASSERT_EQ(prior.n_groups(), 2);
  EXPECT_EQ(prior.eps, eps);

  for (int l = 0; l < 2; ++l) {
    const GroupPrior& gp = prior.groups[l];
    const int r = comp.ranks[l];
    ASSERT_EQ(gp.G.rows(), r);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gp.G);
    // Expected spectrum: (lambda_j / lambda_1)^2 + eps, descending.
    std::vector<double> want;
    for (int j = 0; j < r; ++j) {
      const double ratio = gp.lambda(j) / gp.lambda(0);
      want.push_back(ratio * ratio + eps);
    }
    std::sort(want.begin(), want.end());
    for (int j = 0; j < r; ++j)
      EXPECT_NEAR(eig.eigenvalues()(j), want[j], 1e-10);

    // Top eigenvalue is exactly 1 + eps (the dominant direction).
    EXPECT_NEAR(eig.eigenvalues()(r - 1), 1.0 + eps, 1e-10);
    // Condition number can't exceed (1 + eps)/eps.
    EXPECT_LE(eig.eigenvalues()(r - 1) / eig.eigenvalues()(0),
              (1.0 + eps) / eps + 1e-6);
    EXPECT_FALSE(gp.degenerate);
  }
}

TEST(StructuralPrior, DominantDirectionIsCheapest) {
  CompressedDictionary comp;
  const double eps = 1e-3;
  const StructuralCovariance prior =
      build_from(10, {7}, 0.15, eps, 2, &comp);
  const GroupPrior& gp = prior.groups[0];
  const int r = comp.ranks[0];
  ASSERT_GE(r, 2);

  Eigen::VectorXd q1 = gp.Q.col(0);
  const double cost_q1 = mahalanobis_sq(prior, 0, q1);
  EXPECT_NEAR(cost_q1, 1.0 / (1.0 + eps), 1e-10);
  // Any other unit vector is at least as expensive.
  std::srand(3);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd v = Eigen::VectorXd::Random(r).normalized();
    EXPECT_GE(mahalanobis_sq(prior, 0, v), cost_q1 - 1e-12);
  }
}

TEST(StructuralPrior, MahalanobisAgainstDirectSolve) {
  CompressedDictionary comp;
  const StructuralCovariance prior =
      build_from(11, {6, 8}, 0.2, 1e-2, 4, &comp);
  std::srand(5);
  for (int l = 0; l < 2; ++l) {
    const GroupPrior& gp = prior.groups[l];
    for (int t = 0; t < 5; ++t) {
      const Eigen::VectorXd z = Eigen::VectorXd::Random(gp.G.rows());
      const double direct = z.dot(gp.G.fullPivLu().solve(z));
      EXPECT_NEAR(mahalanobis_sq(prior, l, z), direct,
                  1e-10 * std::max(1.0, direct));
    }
    EXPECT_EQ(mahalanobis_sq(prior, l,
                             Eigen::VectorXd::Zero(gp.G.rows())),
              0.0);
  }
}

TEST(StructuralPrior, InverseAndSqrtConsistent) {
  const StructuralCovariance prior = build_from(9, {6}, 0.2, 1e-3, 6);
  const GroupPrior& gp = prior.groups[0];
  const int r = static_cast<int>(gp.G.rows());
  EXPECT_LE((gp.G * gp.G_inv - Eigen::MatrixXd::Identity(r, r)).norm(),
            1e-9);
  EXPECT_LE((gp.G_sqrt * gp.G_sqrt - gp.G).norm(), 1e-10);
  // Symmetric pieces.
  EXPECT_LE((gp.G - gp.G.transpose()).norm(), 1e-14);
  EXPECT_LE((gp.G_sqrt - gp.G_sqrt.transpose()).norm(), 1e-12);
}

TEST(StructuralPrior, ZeroCoefficientMatrixFallsBackToIdentity) {
  // Hand-build a compressed dictionary whose H block is exactly zero.
  CompressedDictionary comp;
  comp.W_blocks = {Eigen::MatrixXd::Identity(6, 2)};
  comp.H_blocks = {Eigen::MatrixXd::Zero(2, 5)};
  comp.singular_values = {Eigen::VectorXd::Zero(2)};
  comp.ranks = {2};
  comp.W = comp.W_blocks[0];
  const StructuralCovariance prior = build_structural_covariances(comp, 1e-3);
  EXPECT_TRUE(prior.groups[0].degenerate);
  EXPECT_EQ(prior.groups[0].G, Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(prior.groups[0].effective_rank, 0);
  const Eigen::VectorXd z = Eigen::VectorXd::Ones(2);
  EXPECT_NEAR(mahalanobis_sq(prior, 0, z), z.squaredNorm(), 1e-12);
}

TEST(StructuralPrior, EffectiveRankIgnoresNoiseLevelSingularValues) {
  CompressedDictionary comp;
  comp.W_blocks = {Eigen::MatrixXd::Identity(5, 3)};
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, 4);
  h(0, 0) = 2.0;
  h(1, 1) = 1.0;
  h(2, 2) = 1e-14;  // below 1e-12 * lambda_1
  comp.H_blocks = {h};
  comp.singular_values = {Eigen::VectorXd::Zero(3)};
  comp.ranks = {3};
  comp.W = comp.W_blocks[0];
  const StructuralCovariance prior = build_structural_covariances(comp, 1e-3);
  EXPECT_EQ(prior.groups[0].effective_rank, 2);
  EXPECT_FALSE(prior.groups[0].degenerate);
}

TEST(HyperModel, DefaultMatchesClosedFormExamples) {
  // dim 1, r = 1, eta 1e-3: beta = 1/2 + 1 + 1e-3 = 1.501, kappa = -1e-3.
  const HyperModel h1 = default_hypermodel({1}, 1.0, 1e-3, 1e-2);
  EXPECT_NEAR(h1.beta(0), 1.501, 1e-15);
  EXPECT_NEAR(h1.kappa(0), -1e-3, 1e-15);
  EXPECT_EQ(h1.vartheta(0), 1e-2);
  EXPECT_EQ(h1.r, 1.0);

  // dim 4, r = 1/2, eta 1e-3: beta = (4/2 + 1 + 1e-3)/0.5 = 6.002.
  const HyperModel h2 = default_hypermodel({4}, 0.5, 1e-3, 1e-2);
  EXPECT_NEAR(h2.beta(0), 6.002, 1e-12);
  EXPECT_NEAR(h2.kappa(0), -1e-3, 1e-12);
}

TEST(HyperModel, KappaStaysNegativeAcrossDims) {
  std::vector<int> dims;
  for (int d = 1; d <= 40; ++d) dims.push_back(d);
  for (double r : {1.0, 0.5}) {
    const HyperModel h = default_hypermodel(dims, r, 1e-3, 1e-2);
    for (int u = 0; u < h.n_units(); ++u) {
      EXPECT_LT(h.kappa(u), 0.0);
      EXPECT_NEAR(h.kappa(u), -1e-3, 1e-9);
      // kappa = dim/2 + 1 - r*beta by definition.
      EXPECT_NEAR(h.kappa(u), dims[u] / 2.0 + 1.0 - r * h.beta(u), 1e-12);
    }
  }
}

TEST(HyperModel, RegimeSwitchPreservesSensitivity) {
  const HyperModel h1 = default_hypermodel({3, 5, 2}, 1.0, 1e-3, 1e-2);
  const HyperModel h2 = h1.switched(0.5);
  EXPECT_EQ(h2.r, 0.5);
  EXPECT_EQ(h2.dims, h1.dims);
  EXPECT_EQ(h2.vartheta, h1.vartheta);
  for (int u = 0; u < h1.n_units(); ++u) {
    EXPECT_NEAR(h2.kappa(u), h1.kappa(u), 1e-12);
    EXPECT_NEAR(h2.beta(u), (h1.dims[u] / 2.0 + 1.0 - h1.kappa(u)) / 0.5,
                1e-12);
  }
}

}  // namespace
}  // namespace megdict
