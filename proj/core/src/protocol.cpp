#include "megdict/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include <json.hpp>

#include "megdict/errors.hpp"
#include "megdict/rng.hpp"

namespace megdict {

using nlohmann::json;

Artifacts build_artifacts(const ProtocolConfig& cfg) {
  validate(cfg);
  Artifacts art;
  art.space = build_source_space(cfg.n_dipoles, cfg.n_regions, cfg.geometry,
                                 head_seed(cfg.master_seed));
  art.sensors = build_sensors(cfg.n_channels, cfg.geometry);
  art.dict = build_dictionary(art.space, art.sensors);
  art.comp = compress(art.dict, cfg.tau);
  art.dce = estimate_dce(art.dict, art.comp, cfg.delta_min);
  art.priors = build_structural_covariances(art.comp, cfg.eps);
  return art;
}

namespace {

TrialRecord run_trial(const ProtocolConfig& cfg, const Artifacts& art,
                      const ClassifierConfig& ccfg, int region, int trial) {
  TrialRecord rec;
  rec.region = region;
  rec.trial = trial;
  const auto start = std::chrono::steady_clock::now();

  for (int attempt = 0; attempt < 2; ++attempt) {
    rec.attempt = attempt;
    rec.seed = trial_seed(cfg.master_seed, region, trial, attempt);
    Rng rng(rec.seed);
    try {
      const Activation act = simulate_patch(art.space, region, rng);
      const Measurement meas =
          measure(art.space, art.sensors, act, cfg.noise_fraction, rng);
      rec.delta = std::max(meas.noise_std / meas.b_noisy.norm(),
                           cfg.delta_min);
      const ClassificationOutcome out =
          classify(meas.y, art.bundle(), rec.delta, ccfg);
      rec.phase1_winner = out.phase1_winner;
      rec.phase2_winner = out.phase2_winner;
      rec.deflation_set = out.deflation_set;
      rec.theta1_max = out.phase1_theta.maxCoeff();
      rec.theta1_true = out.phase1_theta[region];
      rec.theta2_max = out.phase2_theta.maxCoeff();
      rec.ok = true;
      break;
    } catch (const SilentSourceError& e) {
      rec.error = e.what();  // redraw once, then record the failure
    } catch (const Error& e) {
      rec.error = e.what();
      break;
    }
  }
  rec.elapsed_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - start)
          .count();
  return rec;
}

json record_to_json(const TrialRecord& rec) {
  json j;
  j["region"] = rec.region;
  j["trial"] = rec.trial;
  j["attempt"] = rec.attempt;
  j["seed"] = rec.seed;
  j["ok"] = rec.ok;
  if (!rec.ok) j["error"] = rec.error;
  if (rec.ok) {
    j["delta"] = rec.delta;
    j["phase1_winner"] = rec.phase1_winner;
    j["phase2_winner"] = rec.phase2_winner;
    j["deflation_set"] = rec.deflation_set;
    j["theta1_max"] = rec.theta1_max;
    j["theta1_true"] = rec.theta1_true;
    j["theta2_max"] = rec.theta2_max;
  }
  j["elapsed_ms"] = rec.elapsed_ms;
  return j;
}

json metrics_to_json(const ConfusionSuite& suite) {
  json out = json::array();
  for (std::size_t j = 0; j < suite.metrics.size(); ++j) {
    const RegionMetrics& m = suite.metrics[j];
    json row;
    row["region"] = j;
    row["defined"] = m.defined;
    row["trials"] = suite.trials_per_region[j];
    if (m.defined) {
      row["mcr"] = m.mcr;
      row["gini"] = m.gini;
      row["entropy"] = m.entropy;
      row["recall"] = m.recall;
    }
    out.push_back(row);
  }
  return out;
}

void write_metrics_csv(const std::string& path, const ConfusionSuite& suite) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "region,trials,defined,mcr,gini,entropy,recall\n";
  for (std::size_t j = 0; j < suite.metrics.size(); ++j) {
    const RegionMetrics& m = suite.metrics[j];
    out << j << ',' << suite.trials_per_region[j] << ','
        << (m.defined ? 1 : 0);
    if (m.defined)
      out << ',' << format_double(m.mcr) << ',' << format_double(m.gini)
          << ',' << format_double(m.entropy) << ','
          << format_double(m.recall);
    else
      out << ",,,,";
    out << '\n';
  }
}

Confusion read_confusion_csv(const std::string& path) {
  const Eigen::MatrixXd m = read_csv(path);
  if (m.rows() != m.cols()) throw ConfigError("tally is not square: " + path);
  Confusion c(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (v < 0 || v != std::floor(v))
        throw ConfigError("tally entries must be nonnegative integers");
      c(i, j) = static_cast<int>(v);
    }
  return c;
}

void write_trees(const std::string& run_dir, int phase,
                 const Eigen::MatrixXd& P, int region, double prune) {
  ensure_dir(run_dir + "/trees");
  json all = json::array();
  const int lo = region < 0 ? 0 : region;
  const int hi = region < 0 ? static_cast<int>(P.cols()) : region + 1;
  for (int j = lo; j < hi; ++j) {
    const IdentificationTree tree = identification_tree(P, j, prune);
    json t;
    t["root"] = tree.root;
    t["self_loop"] = tree.self_loop;
    t["edges"] = json::array();
    for (const TreeEdge& e : tree.edges)
      t["edges"].push_back({{"to", e.to}, {"weight", e.weight}});
    all.push_back(t);
    std::ofstream dot(run_dir + "/trees/phase" + std::to_string(phase) +
                      "_region_" + std::to_string(j) + ".dot");
    dot << tree_to_dot(tree);
  }
  std::ofstream jf(run_dir + "/trees_phase" + std::to_string(phase) +
                   ".json");
  jf << all.dump(1) << '\n';
}

}  // namespace

ProtocolResult run_protocol_in_memory(const ProtocolConfig& cfg,
                                      const Artifacts& art) {
  const auto start = std::chrono::steady_clock::now();
  const ClassifierConfig ccfg = cfg.classifier();
  const int L = cfg.n_regions;
  const int T = cfg.trials_per_region;
  const int n_slots = L * T;

  ProtocolResult result;
  result.records.resize(n_slots);

  int workers = cfg.workers > 0
                    ? cfg.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n_slots));

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  const auto worker_fn = [&] {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= n_slots || failed.load()) break;
      try {
        result.records[idx] = run_trial(cfg, art, ccfg, idx / T, idx % T);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };

  if (workers == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (auto& t : pool) t.join();
  }
  if (failed.load())
    throw NumericalError("protocol worker failed: " + first_error);

  // Deterministic reduction in slot order, independent of scheduling.
  std::vector<std::pair<int, int>> pairs1, pairs2;
  for (const TrialRecord& rec : result.records) {
    if (!rec.ok) {
      ++result.failures;
      continue;
    }
    pairs1.emplace_back(rec.region, rec.phase1_winner);
    pairs2.emplace_back(rec.region, rec.phase2_winner);
  }
  result.phase1 = make_suite(tally(pairs1, L));
  result.phase2 = make_suite(tally(pairs2, L));
  result.wall_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return result;
}

ProtocolResult run_protocol(const ProtocolConfig& cfg,
                            const std::string& out_dir) {
  return run_protocol(cfg, out_dir, build_artifacts(cfg));
}

ProtocolResult run_protocol(const ProtocolConfig& cfg,
                            const std::string& out_dir, const Artifacts& art) {
  validate(cfg);
  ensure_dir(out_dir);

  save_head_model(out_dir + "/head_model.json",
                  {art.space, art.sensors, cfg, head_seed(cfg.master_seed)});
  write_matrix(out_dir + "/dictionary.bin", art.dict.atoms);
  write_matrix(out_dir + "/features.bin", art.comp.W);
  {
    json meta;
    meta["config_hash"] = config_hash(cfg);
    meta["group_offset"] = art.dict.group_offset;
    meta["group_size"] = art.dict.group_size;
    meta["col_to_dipole"] = art.dict.col_to_dipole;
    meta["silent_dipoles"] = art.dict.silent_dipoles;
    meta["tau"] = art.comp.tau;
    meta["ranks"] = art.comp.ranks;
    meta["delta_base"] = art.dce.delta;
    // Coefficient blocks are recoverable as H^(l) = W^(l)^T D^(l).
    std::ofstream out(out_dir + "/dictionary_meta.json");
    out << meta.dump(1) << '\n';
  }

  ProtocolResult result = run_protocol_in_memory(cfg, art);

  {
    std::ofstream out(out_dir + "/records.jsonl");
    for (const TrialRecord& rec : result.records)
      out << record_to_json(rec).dump() << '\n';
  }

  write_csv(out_dir + "/c1.csv", result.phase1.counts);
  write_csv(out_dir + "/c2.csv", result.phase2.counts);
  write_csv(out_dir + "/p1.csv", result.phase1.P);
  write_csv(out_dir + "/p2.csv", result.phase2.P);
  write_csv(out_dir + "/q1.csv", result.phase1.Q);
  write_csv(out_dir + "/q2.csv", result.phase2.Q);
  write_metrics_csv(out_dir + "/metrics_phase1.csv", result.phase1);
  write_metrics_csv(out_dir + "/metrics_phase2.csv", result.phase2);

  {
    json metrics;
    metrics["config_hash"] = config_hash(cfg);
    metrics["phase1"] = metrics_to_json(result.phase1);
    metrics["phase2"] = metrics_to_json(result.phase2);
    metrics["never_identified_phase1"] = result.phase1.never_identified;
    metrics["never_identified_phase2"] = result.phase2.never_identified;
    metrics["failures"] = result.failures;
    std::ofstream out(out_dir + "/metrics.json");
    out << metrics.dump(1) << '\n';
  }

  // Scatter pairs and recall summary; same content write_report regenerates.
  write_report(out_dir);
  write_trees(out_dir, 2, result.phase2.P, -1, 0.0);

  const int n_slots = cfg.n_regions * cfg.trials_per_region;
  {
    json manifest;
    manifest["format"] = "run-manifest";
    manifest["config"] = to_kv(cfg);
    manifest["config_hash"] = config_hash(cfg);
    manifest["versions"] = {
        {"library", "1.0.0"},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)}};
    manifest["wall_seconds"] = result.wall_seconds;
    manifest["trials"] = n_slots;
    manifest["failures"] = result.failures;
    std::ofstream out(out_dir + "/manifest.json");
    out << manifest.dump(1) << '\n';
  }

  const double failure_fraction =
      n_slots > 0 ? double(result.failures) / n_slots : 0.0;
  if (failure_fraction > cfg.max_failure_fraction) {
    json report;
    report["failures"] = result.failures;
    report["trials"] = n_slots;
    report["failure_fraction"] = failure_fraction;
    report["limit"] = cfg.max_failure_fraction;
    json details = json::array();
    for (const TrialRecord& rec : result.records)
      if (!rec.ok)
        details.push_back({{"region", rec.region},
                           {"trial", rec.trial},
                           {"seed", rec.seed},
                           {"error", rec.error}});
    report["failed_trials"] = details;
    std::ofstream out(out_dir + "/failure_report.json");
    out << report.dump(1) << '\n';
    throw PartialFailureAbort(
        "aborting: " + std::to_string(result.failures) + " of " +
        std::to_string(n_slots) + " trials failed (limit " +
        std::to_string(cfg.max_failure_fraction) + "); see failure_report.json");
  }
  return result;
}

void write_report(const std::string& run_dir) {
  const Confusion c1 = read_confusion_csv(run_dir + "/c1.csv");
  const Confusion c2 = read_confusion_csv(run_dir + "/c2.csv");
  const ConfusionSuite s1 = make_suite(c1);
  const ConfusionSuite s2 = make_suite(c2);

  {
    std::ofstream out(run_dir + "/scatter.csv");
    if (!out) throw ConfigError("cannot write scatter.csv");
    out << "region,mcr_phase1,mcr_phase2,gini_phase1,gini_phase2\n";
    for (int j = 0; j < s1.n_regions(); ++j) {
      out << j << ',';
      if (s1.metrics[j].defined) out << format_double(s1.metrics[j].mcr);
      out << ',';
      if (s2.metrics[j].defined) out << format_double(s2.metrics[j].mcr);
      out << ',';
      if (s1.metrics[j].defined) out << format_double(s1.metrics[j].gini);
      out << ',';
      if (s2.metrics[j].defined) out << format_double(s2.metrics[j].gini);
      out << '\n';
    }
  }

  // Recall-sorted summary (phase 2 ranking; ties by region index).
  std::vector<int> order(s2.n_regions());
  for (int j = 0; j < s2.n_regions(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return s2.metrics[a].recall > s2.metrics[b].recall;
  });
  std::ofstream out(run_dir + "/summary.csv");
  if (!out) throw ConfigError("cannot write summary.csv");
  out << "rank,region,recall_phase2,mcr_phase2,gini_phase2,entropy_phase2,"
         "recall_phase1\n";
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const int j = order[rank];
    out << rank + 1 << ',' << j << ','
        << format_double(s2.metrics[j].recall) << ','
        << format_double(s2.metrics[j].mcr) << ','
        << format_double(s2.metrics[j].gini) << ','
        << format_double(s2.metrics[j].entropy) << ','
        << format_double(s1.metrics[j].recall) << '\n';
  }
}

void export_trees(const std::string& run_dir, int phase, int region,
                  double prune) {
  if (phase != 1 && phase != 2) throw ConfigError("phase must be 1 or 2");
  const Confusion c =
      read_confusion_csv(run_dir + "/c" + std::to_string(phase) + ".csv");
  write_trees(run_dir, phase, normalize_columns(c), region, prune);
}

std::string classify_one(const HeadModelFile& head, const Eigen::VectorXd& y,
                         const ProtocolConfig& cfg, double delta) {
  if (y.size() != head.sensors.n_channels())
    throw ConfigError("query vector has " + std::to_string(y.size()) +
                      " entries but the head model has " +
                      std::to_string(head.sensors.n_channels()) +
                      " channels");
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  const double norm = y.norm();
  if (!(norm > 0.0) || !y.allFinite())
    throw ConfigError("query vector must be finite and nonzero");

  Artifacts art;
  art.space = head.space;
  art.sensors = head.sensors;
  art.dict = build_dictionary(art.space, art.sensors);
  art.comp = compress(art.dict, cfg.tau);
  art.dce = estimate_dce(art.dict, art.comp, delta);
  art.priors = build_structural_covariances(art.comp, cfg.eps);

  const Eigen::VectorXd y_unit = y / norm;
  const ClassificationOutcome out =
      classify(y_unit, art.bundle(), delta, cfg.classifier());

  json j;
  j["config_hash"] = config_hash(cfg);
  j["delta"] = delta;
  j["phase1_winner"] = out.phase1_winner;
  j["phase2_winner"] = out.phase2_winner;
  j["deflation_set"] = out.deflation_set;
  std::vector<double> theta1(out.phase1_theta.data(),
                             out.phase1_theta.data() + out.phase1_theta.size());
  j["phase1_theta"] = theta1;
  std::map<int, double> region_theta;
  for (int a = 0; a < out.phase2_theta.size(); ++a)
    region_theta[out.atom_region[a]] += out.phase2_theta[a];
  json per_region = json::object();
  for (const auto& [region, total] : region_theta)
    per_region[std::to_string(region)] = total;
  j["phase2_region_theta"] = per_region;
  return j.dump(1) + "\n";
}

}  // namespace megdict
