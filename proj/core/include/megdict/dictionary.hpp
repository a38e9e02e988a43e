#pragma once

#include <Eigen/Dense>
#include <vector>

#include "megdict/head_model.hpp"

namespace megdict {

// Unit-norm atom matrix partitioned into per-region groups. Atoms are stored
// grouped-contiguously by region so group views are column blocks.
struct Dictionary {
  Eigen::MatrixXd atoms;            // m x n_kept
  std::vector<int> group_offset;    // per region, first column of the group
  std::vector<int> group_size;      // per region, n_l
  std::vector<int> col_to_dipole;   // column -> original dipole index
  std::vector<int> region_of_col;   // column -> region
  std::vector<int> silent_dipoles;  // removed near-zero columns

  int n_atoms() const { return static_cast<int>(atoms.cols()); }
  int n_channels() const { return static_cast<int>(atoms.rows()); }
  int n_groups() const { return static_cast<int>(group_size.size()); }

  // m x n_l column block of region l.
  Eigen::Ref<const Eigen::MatrixXd> group_view(int l) const {
    return atoms.middleCols(group_offset[l], group_size[l]);
  }
};

// Normalizes gain columns into atoms, dropping columns whose norm falls
// below 1e-14 x the median column norm. A region losing every atom is a
// configuration error.
Dictionary build_dictionary(const SourceSpace& space,
                            const SensorArray& sensors);

// Same, reusing a precomputed gain matrix.
Dictionary build_dictionary(const Eigen::MatrixXd& gain,
                            const std::vector<int>& region_of, int n_regions);

}  // namespace megdict
