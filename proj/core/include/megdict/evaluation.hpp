#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace megdict {

// L x L integer tally; row = true region, column = identified region.
using Confusion = Eigen::MatrixXi;

struct RegionMetrics {
  double mcr = 0.0;      // misclassification rate, 1 - P_jj
  double gini = 0.0;     // sum_i P_ij (1 - P_ij)
  double entropy = 0.0;  // -sum_i P_ij ln P_ij, 0 ln 0 := 0
  double recall = 0.0;   // 1 - mcr
  bool defined = true;   // false when the region was never identified
};

struct ConfusionSuite {
  Confusion counts;
  Eigen::MatrixXd P;  // column-normalized; zero columns left zero
  Eigen::MatrixXd Q;  // row-normalized; zero rows left zero
  std::vector<RegionMetrics> metrics;           // per column of P
  std::vector<int> never_identified;            // zero columns of counts
  std::vector<int> trials_per_region;           // row sums of counts

  int n_regions() const { return static_cast<int>(counts.rows()); }
  int total_trials() const { return counts.sum(); }
};

struct TreeEdge {
  int to = -1;
  double weight = 0.0;
};

// Identification tree of one region: self-loop at the root plus one edge per
// confusing region.
struct IdentificationTree {
  int root = -1;
  double self_loop = 0.0;
  std::vector<TreeEdge> edges;  // targets != root with weight > prune
};

// (true, identified) pairs -> tally matrix.
Confusion tally(const std::vector<std::pair<int, int>>& records,
                int n_regions);

Eigen::MatrixXd normalize_columns(const Confusion& counts);
Eigen::MatrixXd normalize_rows(const Confusion& counts);

// Full derived suite from a tally.
ConfusionSuite make_suite(const Confusion& counts);

std::vector<RegionMetrics> impurities(const Eigen::MatrixXd& P);

IdentificationTree identification_tree(const Eigen::MatrixXd& P, int region,
                                       double prune = 0.0);

// Graphviz rendering with the self-loop at the root.
std::string tree_to_dot(const IdentificationTree& tree,
                        const std::string& name_prefix = "region");

}  // namespace megdict
