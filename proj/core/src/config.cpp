#include "megdict/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "megdict/errors.hpp"
#include "megdict/io.hpp"

namespace megdict {

ClassifierConfig ProtocolConfig::classifier() const {
  ClassifierConfig cc;
  cc.deflation_p = deflation_p;
  cc.eta_bar = eta_bar;
  cc.vartheta_bar = vartheta_bar;
  cc.phase2_theta_scale = phase2_theta_scale;
  if (winner_rule == "region_sum")
    cc.winner_rule = WinnerRule::region_sum;
  else if (winner_rule == "max_atom")
    cc.winner_rule = WinnerRule::max_atom;
  else
    throw ConfigError("winner_rule must be region_sum or max_atom");

  ZMethod method;
  if (z_method == "normal")
    method = ZMethod::normal_eq;
  else if (z_method == "qr")
    method = ZMethod::stacked_qr;
  else
    throw ConfigError("z_method must be normal or qr");

  cc.phase1_schedule = {max_iter_r1, max_iter_rhalf, tol, method};
  cc.phase2_schedule = {max_iter_r1, 0, tol, method};
  return cc;
}

void apply_preset(ProtocolConfig& cfg, const std::string& name) {
  if (name == "desk") {
    cfg = ProtocolConfig{};
  } else if (name == "paper") {
    cfg = ProtocolConfig{};
    cfg.n_dipoles = 15002;
    cfg.n_channels = 306;
    cfg.n_regions = 148;
    cfg.trials_per_region = 100;
  } else if (name == "tiny") {
    cfg = ProtocolConfig{};
    cfg.n_dipoles = 64;
    cfg.n_channels = 32;
    cfg.n_regions = 8;
    cfg.trials_per_region = 25;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
}

void validate(const ProtocolConfig& cfg) {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.n_dipoles < 1) fail("n_dipoles must be >= 1");
  if (cfg.n_channels < 1) fail("n_channels must be >= 1");
  if (cfg.n_regions < 1 || cfg.n_regions > cfg.n_dipoles)
    fail("need 1 <= n_regions <= n_dipoles");
  if (!(cfg.geometry.source_radius > 0.0))
    fail("source_radius must be > 0");
  if (cfg.geometry.source_radius >= cfg.geometry.conductor_radius)
    fail("source_radius must be < conductor_radius");
  if (cfg.geometry.sensor_radius <= cfg.geometry.conductor_radius)
    fail("sensor_radius must be > conductor_radius");
  if (cfg.geometry.gradiometers && !(cfg.geometry.gradiometer_baseline > 0.0))
    fail("gradiometer_baseline must be > 0");
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) fail("tau must be in (0, 1)");
  if (!(cfg.eps > 0.0)) fail("eps must be > 0");
  if (!(cfg.eta_bar > 0.0)) fail("eta_bar must be > 0");
  if (!(cfg.vartheta_bar > 0.0)) fail("vartheta_bar must be > 0");
  if (cfg.noise_fraction < 0.0) fail("noise_fraction must be >= 0");
  if (cfg.trials_per_region < 1) fail("trials_per_region must be >= 1");
  if (!(cfg.delta_min > 0.0)) fail("delta_min must be > 0");
  if (!(cfg.deflation_p > 0.0 && cfg.deflation_p < 1.0))
    fail("deflation_p must be in (0, 1)");
  if (!(cfg.phase2_theta_scale > 0.0)) fail("phase2_theta_scale must be > 0");
  if (cfg.winner_rule != "region_sum" && cfg.winner_rule != "max_atom")
    fail("winner_rule must be region_sum or max_atom");
  if (cfg.max_iter_r1 < 1) fail("max_iter_r1 must be >= 1");
  if (cfg.max_iter_rhalf < 0) fail("max_iter_rhalf must be >= 0");
  if (!(cfg.tol > 0.0)) fail("tol must be > 0");
  if (cfg.z_method != "normal" && cfg.z_method != "qr")
    fail("z_method must be normal or qr");
  if (cfg.workers < 0) fail("workers must be >= 0");
  if (!(cfg.max_failure_fraction >= 0.0 && cfg.max_failure_fraction <= 1.0))
    fail("max_failure_fraction must be in [0, 1]");
  if (cfg.output_dir.empty()) fail("output_dir must not be empty");
}

std::map<std::string, std::string> to_kv(const ProtocolConfig& c) {
  std::map<std::string, std::string> kv;
  const auto put_d = [&](const std::string& k, double v) {
    kv[k] = format_double(v);
  };
  kv["n_dipoles"] = std::to_string(c.n_dipoles);
  kv["n_channels"] = std::to_string(c.n_channels);
  kv["n_regions"] = std::to_string(c.n_regions);
  put_d("source_radius", c.geometry.source_radius);
  put_d("conductor_radius", c.geometry.conductor_radius);
  put_d("sensor_radius", c.geometry.sensor_radius);
  kv["gradiometers"] = c.geometry.gradiometers ? "true" : "false";
  put_d("gradiometer_baseline", c.geometry.gradiometer_baseline);
  put_d("tau", c.tau);
  put_d("eps", c.eps);
  put_d("eta_bar", c.eta_bar);
  put_d("vartheta_bar", c.vartheta_bar);
  put_d("noise_fraction", c.noise_fraction);
  kv["trials_per_region"] = std::to_string(c.trials_per_region);
  put_d("delta_min", c.delta_min);
  put_d("deflation_p", c.deflation_p);
  put_d("phase2_theta_scale", c.phase2_theta_scale);
  kv["winner_rule"] = c.winner_rule;
  kv["max_iter_r1"] = std::to_string(c.max_iter_r1);
  kv["max_iter_rhalf"] = std::to_string(c.max_iter_rhalf);
  put_d("tol", c.tol);
  kv["z_method"] = c.z_method;
  kv["master_seed"] = std::to_string(c.master_seed);
  kv["workers"] = std::to_string(c.workers);
  kv["output_dir"] = c.output_dir;
  put_d("max_failure_fraction", c.max_failure_fraction);
  return kv;
}

namespace {

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": " + v);
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + key + ": " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": " + v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": " + v);
  }
}

}  // namespace

void apply_kv(ProtocolConfig& c,
              const std::map<std::string, std::string>& kv) {
  // Preset first (regardless of key order), then individual overrides.
  for (const auto& [key, v] : kv)
    if (key == "preset") apply_preset(c, v);
  for (const auto& [key, v] : kv) {
    if (key == "preset") continue;
    if (key == "n_dipoles") c.n_dipoles = parse_int(key, v);
    else if (key == "n_channels") c.n_channels = parse_int(key, v);
    else if (key == "n_regions") c.n_regions = parse_int(key, v);
    else if (key == "source_radius") c.geometry.source_radius = parse_double(key, v);
    else if (key == "conductor_radius") c.geometry.conductor_radius = parse_double(key, v);
    else if (key == "sensor_radius") c.geometry.sensor_radius = parse_double(key, v);
    else if (key == "gradiometers") c.geometry.gradiometers = parse_bool(key, v);
    else if (key == "gradiometer_baseline") c.geometry.gradiometer_baseline = parse_double(key, v);
    else if (key == "tau") c.tau = parse_double(key, v);
    else if (key == "eps") c.eps = parse_double(key, v);
    else if (key == "eta_bar") c.eta_bar = parse_double(key, v);
    else if (key == "vartheta_bar") c.vartheta_bar = parse_double(key, v);
    else if (key == "noise_fraction") c.noise_fraction = parse_double(key, v);
    else if (key == "trials_per_region") c.trials_per_region = parse_int(key, v);
    else if (key == "delta_min") c.delta_min = parse_double(key, v);
    else if (key == "deflation_p") c.deflation_p = parse_double(key, v);
    else if (key == "phase2_theta_scale") c.phase2_theta_scale = parse_double(key, v);
    else if (key == "winner_rule") c.winner_rule = v;
    else if (key == "max_iter_r1") c.max_iter_r1 = parse_int(key, v);
    else if (key == "max_iter_rhalf") c.max_iter_rhalf = parse_int(key, v);
    else if (key == "tol") c.tol = parse_double(key, v);
    else if (key == "z_method") c.z_method = v;
    else if (key == "master_seed") c.master_seed = parse_u64(key, v);
    else if (key == "workers") c.workers = parse_int(key, v);
    else if (key == "output_dir") c.output_dir = v;
    else if (key == "max_failure_fraction") c.max_failure_fraction = parse_double(key, v);
    else throw ConfigError("unknown config key: " + key);
  }
}

ProtocolConfig from_kv(const std::map<std::string, std::string>& kv) {
  ProtocolConfig c;
  apply_kv(c, kv);
  return c;
}

void save_config_file(const std::string& path, const ProtocolConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << "# two-phase dictionary classifier configuration\n";
  for (const auto& [key, value] : to_kv(cfg)) out << key << "=" << value << "\n";
}

ProtocolConfig load_config_file(const std::string& path) {
  return from_kv(read_config_kv(path));
}

std::map<std::string, std::string> read_config_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // Trim.
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not key=value: " + line);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto kend = key.find_last_not_of(" \t");
    key = key.substr(0, kend + 1);
    const auto vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    try {
      (void)from_kv({{key, value}});  // key/value check, attributed to the line
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    kv[key] = value;
  }
  return kv;
}

std::string canonical_string(const ProtocolConfig& cfg) {
  std::ostringstream out;
  // workers/output_dir place the run but don't change its results, so they
  // stay out of the identity: reruns elsewhere hash the same.
  for (const auto& [key, value] : to_kv(cfg))
    if (key != "workers" && key != "output_dir")
      out << key << "=" << value << "\n";
  return out.str();
}

std::string config_hash(const ProtocolConfig& cfg) {
  // FNV-1a 64.
  const std::string text = canonical_string(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string resolve_output_dir(const std::string& output_dir) {
  if (!output_dir.empty() && output_dir.front() == '/') return output_dir;
  const char* root = std::getenv("MEGDICT_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0') return output_dir;
  std::string base(root);
  if (base.back() != '/') base += '/';
  return base + output_dir;
}

}  // namespace megdict
