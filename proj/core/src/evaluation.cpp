#include "megdict/evaluation.hpp"

#include <cmath>
#include <sstream>

#include "megdict/errors.hpp"

namespace megdict {

Confusion tally(const std::vector<std::pair<int, int>>& records,
                int n_regions) {
  Confusion counts = Confusion::Zero(n_regions, n_regions);
  for (const auto& [truth, identified] : records) {
    if (truth < 0 || truth >= n_regions || identified < 0 ||
        identified >= n_regions)
      throw ConfigError("region index out of range in trial record");
    counts(truth, identified) += 1;
  }
  return counts;
}

Eigen::MatrixXd normalize_columns(const Confusion& counts) {
  Eigen::MatrixXd P = counts.cast<double>();
  for (int j = 0; j < P.cols(); ++j) {
    const double total = P.col(j).sum();
    if (total > 0.0) P.col(j) /= total;
  }
  return P;
}

Eigen::MatrixXd normalize_rows(const Confusion& counts) {
  Eigen::MatrixXd Q = counts.cast<double>();
  for (int i = 0; i < Q.rows(); ++i) {
    const double total = Q.row(i).sum();
    if (total > 0.0) Q.row(i) /= total;
  }
  return Q;
}

std::vector<RegionMetrics> impurities(const Eigen::MatrixXd& P) {
  std::vector<RegionMetrics> metrics(P.cols());
  for (int j = 0; j < P.cols(); ++j) {
    RegionMetrics& m = metrics[j];
    if (P.col(j).sum() == 0.0) {
      m.defined = false;
      continue;
    }
    m.mcr = 1.0 - P(j, j);
    m.recall = P(j, j);
    m.gini = 0.0;
    m.entropy = 0.0;
    for (int i = 0; i < P.rows(); ++i) {
      const double p = P(i, j);
      m.gini += p * (1.0 - p);
      if (p > 0.0) m.entropy -= p * std::log(p);
    }
  }
  return metrics;
}

ConfusionSuite make_suite(const Confusion& counts) {
  ConfusionSuite suite;
  suite.counts = counts;
  suite.P = normalize_columns(counts);
  suite.Q = normalize_rows(counts);
  suite.metrics = impurities(suite.P);
  suite.trials_per_region.resize(counts.rows());
  for (int i = 0; i < counts.rows(); ++i)
    suite.trials_per_region[i] = counts.row(i).sum();
  for (int j = 0; j < counts.cols(); ++j)
    if (counts.col(j).sum() == 0) suite.never_identified.push_back(j);
  return suite;
}

IdentificationTree identification_tree(const Eigen::MatrixXd& P, int region,
                                       double prune) {
  if (region < 0 || region >= P.cols())
    throw ConfigError("region index out of range");
  IdentificationTree tree;
  tree.root = region;
  tree.self_loop = P(region, region);
  for (int i = 0; i < P.rows(); ++i) {
    if (i == region) continue;
    if (P(i, region) > prune) tree.edges.push_back({i, P(i, region)});
  }
  return tree;
}

std::string tree_to_dot(const IdentificationTree& tree,
                        const std::string& name_prefix) {
  std::ostringstream out;
  out.precision(6);
  const auto node = [&](int i) {
    return '"' + name_prefix + '_' + std::to_string(i) + '"';
  };
  out << "digraph identification {\n";
  out << "  " << node(tree.root) << " [shape=doublecircle];\n";
  out << "  " << node(tree.root) << " -> " << node(tree.root) << " [label=\""
      << tree.self_loop << "\"];\n";
  for (const TreeEdge& e : tree.edges)
    out << "  " << node(tree.root) << " -> " << node(e.to) << " [label=\""
        << e.weight << "\"];\n";
  out << "}\n";
  return out.str();
}

}  // namespace megdict
