#include "megdict/dictionary.hpp"

#include <gtest/gtest.h>

#include "megdict/errors.hpp"

namespace megdict {
namespace {

Eigen::MatrixXd random_gain(int m, int n, unsigned seed) {
  std::srand(seed);
  return Eigen::MatrixXd::Random(m, n);
}

TEST(Dictionary, AtomsAreUnitNorm) {
  const Eigen::MatrixXd gain = random_gain(12, 20, 1);
  const std::vector<int> region_of = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1,
                                      2, 2, 2, 2, 2, 3, 3, 3, 3, 3};
  const Dictionary dict = build_dictionary(gain, region_of, 4);
  ASSERT_EQ(dict.n_atoms(), 20);
  for (int k = 0; k < dict.n_atoms(); ++k)
    EXPECT_NEAR(dict.atoms.col(k).norm(), 1.0, 1e-12);
}

TEST(Dictionary, GroupViewsTileTheMatrix) {
  const Eigen::MatrixXd gain = random_gain(8, 15, 2);
  // Interleaved regions force a reordering into contiguous groups.
  std::vector<int> region_of(15);
  for (int k = 0; k < 15; ++k) region_of[k] = k % 3;
  const Dictionary dict = build_dictionary(gain, region_of, 3);

  int cols = 0;
  for (int l = 0; l < dict.n_groups(); ++l) {
    EXPECT_EQ(dict.group_offset[l], cols);
    const auto view = dict.group_view(l);
    for (int j = 0; j < view.cols(); ++j) {
      const int col = dict.group_offset[l] + j;
      EXPECT_EQ(view.col(j), dict.atoms.col(col));
      EXPECT_EQ(dict.region_of_col[col], l);
      EXPECT_EQ(region_of[dict.col_to_dipole[col]], l);
      // Each atom is its dipole's gain column, normalized.
      const Eigen::VectorXd want =
          gain.col(dict.col_to_dipole[col]).normalized();
      EXPECT_LE((dict.atoms.col(col) - want).norm(), 1e-14);
    }
    cols += dict.group_size[l];
  }
  EXPECT_EQ(cols, dict.n_atoms());
}

TEST(Dictionary, DuplicateColumnsGiveIdenticalAtoms) {
  Eigen::MatrixXd gain = random_gain(10, 6, 3);
  gain.col(4) = 2.5 * gain.col(1);  // same direction, different magnitude
  const std::vector<int> region_of = {0, 0, 1, 1, 0, 1};
  const Dictionary dict = build_dictionary(gain, region_of, 2);

  int a = -1, b = -1;
  for (int k = 0; k < dict.n_atoms(); ++k) {
    if (dict.col_to_dipole[k] == 1) a = k;
    if (dict.col_to_dipole[k] == 4) b = k;
  }
  ASSERT_GE(a, 0);
  ASSERT_GE(b, 0);
  EXPECT_LE((dict.atoms.col(a) - dict.atoms.col(b)).norm(), 1e-15);
}

TEST(Dictionary, GramEntriesMatchNormalizedInnerProducts) {
  const Eigen::MatrixXd gain = random_gain(16, 9, 4);
  std::vector<int> region_of = {0, 1, 2, 0, 1, 2, 0, 1, 2};
  const Dictionary dict = build_dictionary(gain, region_of, 3);

  // Independent route: cosine similarity straight from the raw columns.
  for (int a = 0; a < dict.n_atoms(); ++a)
    for (int b = 0; b < dict.n_atoms(); ++b) {
      const int i = dict.col_to_dipole[a];
      const int j = dict.col_to_dipole[b];
      const double want = gain.col(i).dot(gain.col(j)) /
                          (gain.col(i).norm() * gain.col(j).norm());
      EXPECT_NEAR(dict.atoms.col(a).dot(dict.atoms.col(b)), want, 1e-12);
    }
}

TEST(Dictionary, NearZeroColumnsRemovedAsSilent) {
  Eigen::MatrixXd gain = random_gain(10, 8, 5);
  for (int k = 0; k < 8; ++k) gain.col(k).normalize();
  gain.col(3) *= 1e-16;  // far below 1e-14 x median norm
  gain.col(6).setZero();
  const std::vector<int> region_of = {0, 0, 0, 0, 1, 1, 1, 1};
  const Dictionary dict = build_dictionary(gain, region_of, 2);

  EXPECT_EQ(dict.n_atoms(), 6);
  EXPECT_EQ(dict.silent_dipoles, (std::vector<int>{3, 6}));
  for (int k = 0; k < dict.n_atoms(); ++k) {
    EXPECT_NE(dict.col_to_dipole[k], 3);
    EXPECT_NE(dict.col_to_dipole[k], 6);
  }
  EXPECT_EQ(dict.group_size[0], 3);
  EXPECT_EQ(dict.group_size[1], 3);
}

TEST(Dictionary, BorderlineColumnAtThresholdIsKept) {
  Eigen::MatrixXd gain = random_gain(10, 5, 6);
  for (int k = 0; k < 5; ++k) gain.col(k).normalize();
  gain.col(2) *= 1e-13;  // above 1e-14 x median (median stays ~1)
  const std::vector<int> region_of = {0, 0, 0, 1, 1};
  const Dictionary dict = build_dictionary(gain, region_of, 2);
  EXPECT_EQ(dict.n_atoms(), 5);
  EXPECT_TRUE(dict.silent_dipoles.empty());
}

TEST(Dictionary, RegionLosingAllAtomsIsFatal) {
  Eigen::MatrixXd gain = random_gain(10, 6, 7);
  gain.col(4).setZero();
  gain.col(5).setZero();
  const std::vector<int> region_of = {0, 0, 0, 0, 1, 1};
  EXPECT_THROW(build_dictionary(gain, region_of, 2), ConfigError);
}

TEST(Dictionary, BuiltFromHeadMatchesGainRoute) {
  const SourceSpace space = build_source_space(64, 8, GeometryConfig{}, 5);
  const SensorArray sensors = build_sensors(24, GeometryConfig{});
  const Dictionary direct = build_dictionary(space, sensors);
  const Dictionary via_gain =
      build_dictionary(gain_matrix(space, sensors), space.region_of, 8);
  EXPECT_EQ(direct.atoms, via_gain.atoms);
  EXPECT_EQ(direct.col_to_dipole, via_gain.col_to_dipole);
  EXPECT_EQ(direct.group_offset, via_gain.group_offset);
}

}  // namespace
}  // namespace megdict
