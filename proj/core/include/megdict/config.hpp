#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "megdict/classifier.hpp"
#include "megdict/head_model.hpp"

namespace megdict {

// Full experiment description; every field has a CLI flag of the same name
// (underscores become dashes) and a config-file key.
struct ProtocolConfig {
  // Head model
  int n_dipoles = 1024;
  int n_channels = 64;
  int n_regions = 32;
  GeometryConfig geometry;

  // Compression and priors. tau keeps the first phase a coarse screen;
  // below ~0.25 it is nearly full-resolution and the second phase has no
  // room left to improve.
  double tau = 0.35;
  double eps = 1e-3;
  double eta_bar = 1e-3;
  double vartheta_bar = 1e-2;

  // Trials
  double noise_fraction = 0.005;
  int trials_per_region = 25;
  double delta_min = 1e-3;  // floor for the per-trial noise scale

  // Classifier
  double deflation_p = 0.005;
  double phase2_theta_scale = 10.0;
  std::string winner_rule = "region_sum";  // or "max_atom"

  // Solver schedule
  int max_iter_r1 = 150;
  int max_iter_rhalf = 150;
  double tol = 1e-4;
  std::string z_method = "normal";  // protocol hot path; or "qr"

  // Run control
  std::uint64_t master_seed = 1;
  int workers = 0;  // 0: hardware concurrency
  std::string output_dir = "run";
  double max_failure_fraction = 0.01;  // above this the run aborts

  ClassifierConfig classifier() const;
};

// Named presets: "desk" (the defaults above) and "paper"
// (n=15002, m=306, L=148, 100 trials/region; long-running).
void apply_preset(ProtocolConfig& cfg, const std::string& name);

// Throws ConfigError with a field-specific message.
void validate(const ProtocolConfig& cfg);

// Lossless round-trip through a flat key=value map (doubles as 17
// significant digits).
std::map<std::string, std::string> to_kv(const ProtocolConfig& cfg);
ProtocolConfig from_kv(const std::map<std::string, std::string>& kv);

// Lays `kv` onto an existing config; a "preset" key is applied first.
void apply_kv(ProtocolConfig& cfg, const std::map<std::string, std::string>& kv);

// key=value file with '#' comments.
void save_config_file(const std::string& path, const ProtocolConfig& cfg);
ProtocolConfig load_config_file(const std::string& path);

// File parsing alone, with line-attributed errors; callers choose the base
// config the keys land on.
std::map<std::string, std::string> read_config_kv(const std::string& path);

// Canonical serialized form (sorted keys) and its FNV-1a hash; stamped into
// every result file for provenance. Execution placement (workers,
// output_dir) is excluded so identical experiments hash identically.
std::string canonical_string(const ProtocolConfig& cfg);
std::string config_hash(const ProtocolConfig& cfg);

// Resolves the output directory against MEGDICT_OUTPUT_ROOT when set and
// `output_dir` is relative.
std::string resolve_output_dir(const std::string& output_dir);

}  // namespace megdict
