#include "megdict/dictionary.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "megdict/errors.hpp"

namespace megdict {

Dictionary build_dictionary(const Eigen::MatrixXd& gain,
                            const std::vector<int>& region_of,
                            int n_regions) {
  const int n = static_cast<int>(gain.cols());
  if (static_cast<int>(region_of.size()) != n)
    throw ConfigError("region map does not match gain columns");

  Eigen::VectorXd norms = gain.colwise().norm();
  std::vector<double> sorted(norms.data(), norms.data() + n);
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double median = sorted[n / 2];
  const double cutoff = 1e-14 * median;

  Dictionary dict;
  dict.group_offset.assign(n_regions, 0);
  dict.group_size.assign(n_regions, 0);

  // Grouped-contiguous atom order: all kept dipoles of region 0, then 1, ...
  std::vector<std::vector<int>> kept(n_regions);
  for (int k = 0; k < n; ++k) {
    const int l = region_of[k];
    if (l < 0 || l >= n_regions) throw ConfigError("region index out of range");
    if (norms[k] < cutoff)
      dict.silent_dipoles.push_back(k);
    else
      kept[l].push_back(k);
  }
  for (int l = 0; l < n_regions; ++l)
    if (kept[l].empty())
      throw ConfigError("region " + std::to_string(l) +
                        " lost all atoms to silence");

  int total = 0;
  for (int l = 0; l < n_regions; ++l) {
    dict.group_offset[l] = total;
    dict.group_size[l] = static_cast<int>(kept[l].size());
    total += dict.group_size[l];
  }
  dict.atoms.resize(gain.rows(), total);
  dict.col_to_dipole.resize(total);
  dict.region_of_col.resize(total);
  int col = 0;
  for (int l = 0; l < n_regions; ++l)
    for (int k : kept[l]) {
      dict.atoms.col(col) = gain.col(k) / norms[k];
      dict.col_to_dipole[col] = k;
      dict.region_of_col[col] = l;
      ++col;
    }
  return dict;
}

Dictionary build_dictionary(const SourceSpace& space,
                            const SensorArray& sensors) {
  return build_dictionary(gain_matrix(space, sensors), space.region_of,
                          space.n_regions());
}

}  // namespace megdict
