// Command-line front end: build synthetic head models, run the two-phase
// classification protocol, classify single queries, and export reports.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "megdict/errors.hpp"
#include "megdict/protocol.hpp"

namespace {

using megdict::ProtocolConfig;

// Mirrors every ProtocolConfig field as a flag on `cmd`; a config file via
// --config supplies defaults that explicit flags override.
void add_config_flags(CLI::App* cmd, ProtocolConfig& cfg,
                      std::string& config_path) {
  cmd->add_option("--config", config_path,
                  "key=value config file (same format run directories echo)");
  cmd->add_option("--n-dipoles", cfg.n_dipoles, "source dipole count");
  cmd->add_option("--n-channels", cfg.n_channels, "sensor channel count");
  cmd->add_option("--n-regions", cfg.n_regions, "atlas region count");
  cmd->add_option("--source-radius", cfg.geometry.source_radius,
                  "dipole shell radius [m]");
  cmd->add_option("--conductor-radius", cfg.geometry.conductor_radius,
                  "conductor sphere radius [m]");
  cmd->add_option("--sensor-radius", cfg.geometry.sensor_radius,
                  "sensor shell radius [m]");
  cmd->add_flag("--gradiometers", cfg.geometry.gradiometers,
                "synthesize planar gradiometers on odd channels");
  cmd->add_option("--gradiometer-baseline",
                  cfg.geometry.gradiometer_baseline,
                  "gradiometer baseline [m]");
  cmd->add_option("--tau", cfg.tau, "SVD truncation threshold in (0,1)");
  cmd->add_option("--eps", cfg.eps, "structural prior ridge");
  cmd->add_option("--eta-bar", cfg.eta_bar, "hyperprior sensitivity");
  cmd->add_option("--vartheta-bar", cfg.vartheta_bar, "hyperprior scale");
  cmd->add_option("--noise-fraction", cfg.noise_fraction,
                  "noise std as a fraction of the peak channel");
  cmd->add_option("--trials-per-region", cfg.trials_per_region,
                  "simulated trials per region");
  cmd->add_option("--delta-min", cfg.delta_min,
                  "floor for the per-trial noise scale");
  cmd->add_option("--deflation-p", cfg.deflation_p,
                  "variance threshold for dictionary deflation");
  cmd->add_option("--phase2-theta-scale", cfg.phase2_theta_scale,
                  "phase-II prior scale multiplier");
  cmd->add_option("--winner-rule", cfg.winner_rule,
                  "phase-II winner: region_sum or max_atom");
  cmd->add_option("--max-iter-r1", cfg.max_iter_r1,
                  "iteration cap, exponent-1 regime");
  cmd->add_option("--max-iter-rhalf", cfg.max_iter_rhalf,
                  "iteration cap, exponent-1/2 regime (0 disables)");
  cmd->add_option("--tol", cfg.tol, "relative variance-change tolerance");
  cmd->add_option("--z-method", cfg.z_method,
                  "coefficient update: normal or qr");
  cmd->add_option("--master-seed", cfg.master_seed, "master RNG seed");
  cmd->add_option("--workers", cfg.workers,
                  "worker threads (0 = hardware concurrency)");
  cmd->add_option("--output-dir", cfg.output_dir,
                  "output directory (relative paths resolve against "
                  "$MEGDICT_OUTPUT_ROOT)");
  cmd->add_option("--max-failure-fraction", cfg.max_failure_fraction,
                  "failed-trial fraction that aborts the run");
}

void apply_preset_flag(CLI::App* cmd, std::string& preset) {
  cmd->add_option("--preset", preset, "desk, paper, or tiny")
      ->check(CLI::IsMember({"desk", "paper", "tiny"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-phase Bayesian dictionary classifier for magnetometer "
               "source identification"};
  app.require_subcommand(1);

  ProtocolConfig cfg;
  std::string preset = "desk";
  std::string config_path;

  auto* build_head = app.add_subcommand(
      "build-head", "generate a synthetic head model and dictionary");
  std::string head_out = "head_model.json";
  bool with_matrices = false;
  apply_preset_flag(build_head, preset);
  add_config_flags(build_head, cfg, config_path);
  build_head->add_option("--out", head_out, "head model JSON path");
  build_head->add_flag("--with-matrices", with_matrices,
                       "also export dictionary.bin and features.bin");

  auto* run = app.add_subcommand("run-protocol",
                                 "run the full region x trial experiment");
  apply_preset_flag(run, preset);
  add_config_flags(run, cfg, config_path);

  auto* one = app.add_subcommand("classify-one",
                                 "classify a single query vector");
  std::string head_in, y_path, outcome_path;
  double delta_one = 0.0;
  apply_preset_flag(one, preset);
  add_config_flags(one, cfg, config_path);
  one->add_option("--head", head_in, "head model JSON")->required();
  one->add_option("--y", y_path, "query vector (.csv/.txt or .bin)")
      ->required();
  one->add_option("--delta", delta_one,
                  "noise scale (default: delta_min from the config)");
  one->add_option("--out", outcome_path, "outcome JSON path (default stdout)");

  auto* report = app.add_subcommand(
      "report", "rebuild summary tables from a completed run directory");
  std::string run_dir;
  report->add_option("--run", run_dir, "run directory")->required();

  auto* trees = app.add_subcommand("tree-export",
                                   "export identification trees");
  std::string trees_dir;
  int tree_phase = 2;
  int tree_region = -1;
  double prune = 0.0;
  trees->add_option("--run", trees_dir, "run directory")->required();
  trees->add_option("--phase", tree_phase, "tally to use: 1 or 2");
  trees->add_option("--region", tree_region, "region (default: all)");
  trees->add_option("--prune", prune, "drop edges with weight <= this");

  // Precedence, lowest to highest: defaults, --preset, --config file,
  // explicit flags. CLI11 fills `cfg` with flags only, so rebuild the base
  // and lay the parsed flags back on top.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : megdict::exit_config_error;
  }

  try {
    for (CLI::App* cmd : {build_head, run, one}) {
      if (cmd->parsed() &&
          (cmd->count("--preset") || cmd->count("--config"))) {
        ProtocolConfig base;
        if (cmd->count("--preset")) megdict::apply_preset(base, preset);
        if (cmd->count("--config"))
          megdict::apply_kv(base, megdict::read_config_kv(config_path));
        ProtocolConfig flags_only = cfg;
        cfg = base;
        const auto keep = [&](const std::string& flag, auto member) {
          if (cmd->count(flag)) cfg.*member = flags_only.*member;
        };
        keep("--n-dipoles", &ProtocolConfig::n_dipoles);
        keep("--n-channels", &ProtocolConfig::n_channels);
        keep("--n-regions", &ProtocolConfig::n_regions);
        keep("--tau", &ProtocolConfig::tau);
        keep("--eps", &ProtocolConfig::eps);
        keep("--eta-bar", &ProtocolConfig::eta_bar);
        keep("--vartheta-bar", &ProtocolConfig::vartheta_bar);
        keep("--noise-fraction", &ProtocolConfig::noise_fraction);
        keep("--trials-per-region", &ProtocolConfig::trials_per_region);
        keep("--delta-min", &ProtocolConfig::delta_min);
        keep("--deflation-p", &ProtocolConfig::deflation_p);
        keep("--phase2-theta-scale", &ProtocolConfig::phase2_theta_scale);
        keep("--winner-rule", &ProtocolConfig::winner_rule);
        keep("--max-iter-r1", &ProtocolConfig::max_iter_r1);
        keep("--max-iter-rhalf", &ProtocolConfig::max_iter_rhalf);
        keep("--tol", &ProtocolConfig::tol);
        keep("--z-method", &ProtocolConfig::z_method);
        keep("--master-seed", &ProtocolConfig::master_seed);
        keep("--workers", &ProtocolConfig::workers);
        keep("--output-dir", &ProtocolConfig::output_dir);
        keep("--max-failure-fraction",
             &ProtocolConfig::max_failure_fraction);
        if (cmd->count("--source-radius"))
          cfg.geometry.source_radius = flags_only.geometry.source_radius;
        if (cmd->count("--conductor-radius"))
          cfg.geometry.conductor_radius = flags_only.geometry.conductor_radius;
        if (cmd->count("--sensor-radius"))
          cfg.geometry.sensor_radius = flags_only.geometry.sensor_radius;
        if (cmd->count("--gradiometers"))
          cfg.geometry.gradiometers = flags_only.geometry.gradiometers;
        if (cmd->count("--gradiometer-baseline"))
          cfg.geometry.gradiometer_baseline =
              flags_only.geometry.gradiometer_baseline;
      }
    }

    if (build_head->parsed()) {
      megdict::validate(cfg);
      const auto space = megdict::build_source_space(
          cfg.n_dipoles, cfg.n_regions, cfg.geometry,
          megdict::head_seed(cfg.master_seed));
      const auto sensors =
          megdict::build_sensors(cfg.n_channels, cfg.geometry);
      megdict::save_head_model(
          head_out, {space, sensors, cfg, megdict::head_seed(cfg.master_seed)});
      std::cout << "wrote " << head_out << "\n";
      if (with_matrices) {
        const auto dict = megdict::build_dictionary(space, sensors);
        const auto comp = megdict::compress(dict, cfg.tau);
        megdict::write_matrix("dictionary.bin", dict.atoms);
        megdict::write_matrix("features.bin", comp.W);
        std::cout << "wrote dictionary.bin and features.bin\n";
      }
    } else if (run->parsed()) {
      megdict::validate(cfg);
      const std::string out_dir = megdict::resolve_output_dir(cfg.output_dir);
      const auto result = megdict::run_protocol(cfg, out_dir);
      std::cout << "completed " << result.records.size() << " trials ("
                << result.failures << " failures) in " << result.wall_seconds
                << " s; results in " << out_dir << "\n";
    } else if (one->parsed()) {
      megdict::validate(cfg);
      const auto head = megdict::load_head_model(head_in);
      const Eigen::VectorXd y = megdict::read_vector(y_path);
      const double delta = delta_one > 0.0 ? delta_one : cfg.delta_min;
      const std::string outcome = megdict::classify_one(head, y, cfg, delta);
      if (outcome_path.empty()) {
        std::cout << outcome;
      } else {
        std::ofstream out(outcome_path);
        out << outcome;
        std::cout << "wrote " << outcome_path << "\n";
      }
    } else if (report->parsed()) {
      megdict::write_report(run_dir);
      std::cout << "wrote summary.csv and scatter.csv in " << run_dir << "\n";
    } else if (trees->parsed()) {
      megdict::export_trees(trees_dir, tree_phase, tree_region, prune);
      std::cout << "wrote trees under " << trees_dir << "\n";
    }
  } catch (const megdict::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return megdict::exit_ok;
}
