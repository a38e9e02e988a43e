#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "megdict/classifier.hpp"
#include "megdict/config.hpp"
#include "megdict/evaluation.hpp"
#include "megdict/io.hpp"

namespace megdict {

// Trial-independent pipeline products, built once per run.
struct Artifacts {
  SourceSpace space;
  SensorArray sensors;
  Dictionary dict;
  CompressedDictionary comp;
  DceModel dce;
  StructuralCovariance priors;

  ArtifactBundle bundle() const { return {&dict, &comp, &dce, &priors}; }
};

Artifacts build_artifacts(const ProtocolConfig& cfg);

struct TrialRecord {
  int region = -1;
  int trial = -1;
  int attempt = 0;
  bool ok = false;
  std::string error;
  std::uint64_t seed = 0;
  double delta = 0.0;
  int phase1_winner = -1;
  int phase2_winner = -1;
  std::vector<int> deflation_set;
  double theta1_max = 0.0;
  double theta1_true = 0.0;  // variance assigned to the true region
  double theta2_max = 0.0;
  double elapsed_ms = 0.0;
};

struct ProtocolResult {
  ConfusionSuite phase1;
  ConfusionSuite phase2;
  std::vector<TrialRecord> records;
  int failures = 0;
  double wall_seconds = 0.0;
};

// Full experiment: artifacts once, then the region x trial grid across
// workers with per-trial derived seeds. Writes every result artifact into
// `out_dir` (resolved beforehand). A silent draw is retried once; failures
// above cfg.max_failure_fraction abort with PartialFailureAbort after
// writing a failure report.
ProtocolResult run_protocol(const ProtocolConfig& cfg,
                            const std::string& out_dir);

// Same, reusing artifacts already built (e.g. from a stored head model).
ProtocolResult run_protocol(const ProtocolConfig& cfg,
                            const std::string& out_dir, const Artifacts& art);

// In-memory variant (no files); used by tests.
ProtocolResult run_protocol_in_memory(const ProtocolConfig& cfg,
                                      const Artifacts& artifacts);

// Single query against a stored head model; returns the outcome JSON text.
std::string classify_one(const HeadModelFile& head, const Eigen::VectorXd& y,
                         const ProtocolConfig& cfg, double delta);

// Rebuilds summary tables, scatter data, and identification trees from a
// completed run directory (reads the tallies back from disk).
void write_report(const std::string& run_dir);

// Tree exports for one phase; negative region means all regions.
void export_trees(const std::string& run_dir, int phase, int region,
                  double prune);

}  // namespace megdict
