#include "megdict/io.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "megdict/errors.hpp"

namespace megdict {

namespace {

constexpr char k_magic[4] = {'M', 'D', 'M', 'X'};
constexpr std::uint32_t k_version = 1;

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write matrix file: " + path);
  out.write(k_magic, 4);
  write_raw(out, k_version);
  write_raw(out, static_cast<std::uint64_t>(m.rows()));
  write_raw(out, static_cast<std::uint64_t>(m.cols()));
  // Row-major payload.
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      write_raw(out, v);
    }
  if (!out) throw ConfigError("short write on matrix file: " + path);
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read matrix file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, k_magic, 4) != 0)
    throw ConfigError("not a matrix container: " + path);
  const auto version = read_raw<std::uint32_t>(in);
  if (version != k_version)
    throw ConfigError("unsupported matrix container version in " + path);
  const auto rows = read_raw<std::uint64_t>(in);
  const auto cols = read_raw<std::uint64_t>(in);
  if (!in || rows > (1ULL << 32) || cols > (1ULL << 32))
    throw ConfigError("corrupt matrix header in " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = read_raw<double>(in);
  if (!in) throw ConfigError("truncated matrix payload in " + path);
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin != end && std::isspace(static_cast<unsigned char>(*begin)))
    ++begin;
  while (end != begin && std::isspace(static_cast<unsigned char>(end[-1])))
    --end;
  if (begin != end && *begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (begin == end || ptr != end || ec != std::errc())
    throw ConfigError("bad numeric value: " + text);
  return value;
}

void write_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write csv: " + path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_csv(const std::string& path, const Eigen::MatrixXi& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write csv: " + path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read csv: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(parse_double(cell));
      } catch (const std::exception&) {
        throw ConfigError("bad numeric cell in " + path + ": " + cell);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("ragged csv: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

Eigen::VectorXd read_vector(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  Eigen::MatrixXd m;
  if (ext == ".bin" || ext == ".mdmx")
    m = read_matrix(path);
  else
    m = read_csv(path);
  if (m.size() == 0) throw ConfigError("empty vector file: " + path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw ConfigError("vector file has more than one row and column: " + path);
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw ConfigError("cannot create directory " + path + ": " +
                            ec.message());
}

namespace {

// Head-model JSON is written by hand so every float carries 17 significant
// digits and round-trips exactly.
void write_vec3_array(std::ostream& out, const Eigen::Matrix3Xd& m) {
  out << '[';
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    if (k) out << ',';
    out << '[' << format_double(m(0, k)) << ',' << format_double(m(1, k))
        << ',' << format_double(m(2, k)) << ']';
  }
  out << ']';
}

Eigen::Matrix3Xd read_vec3_array(const nlohmann::json& j,
                                 const std::string& what) {
  if (!j.is_array()) throw ConfigError("head model: " + what + " not an array");
  Eigen::Matrix3Xd m(3, j.size());
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& v = j[k];
    if (!v.is_array() || v.size() != 3)
      throw ConfigError("head model: bad 3-vector in " + what);
    for (int i = 0; i < 3; ++i) m(i, k) = v[i].get<double>();
  }
  return m;
}

}  // namespace

void save_head_model(const std::string& path, const HeadModelFile& file) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write head model: " + path);
  out << "{\n\"format\":\"head-model\",\n\"version\":1,\n";
  out << "\"seed\":" << file.seed << ",\n";
  out << "\"config\":{";
  bool first = true;
  for (const auto& [key, value] : to_kv(file.config)) {
    if (!first) out << ',';
    first = false;
    out << '"' << key << "\":\"" << value << '"';
  }
  out << "},\n";
  out << "\"conductor_radius\":"
      << format_double(file.space.conductor_radius) << ",\n";
  out << "\"positions\":";
  write_vec3_array(out, file.space.positions);
  out << ",\n\"orientations\":";
  write_vec3_array(out, file.space.orientations);
  out << ",\n\"region_of\":[";
  for (std::size_t k = 0; k < file.space.region_of.size(); ++k) {
    if (k) out << ',';
    out << file.space.region_of[k];
  }
  out << "],\n\"sensor_positions\":";
  write_vec3_array(out, file.sensors.positions);
  out << ",\n\"sensor_axes\":";
  write_vec3_array(out, file.sensors.axes);
  out << ",\n\"sensor_kinds\":[";
  for (std::size_t i = 0; i < file.sensors.kinds.size(); ++i) {
    if (i) out << ',';
    out << (file.sensors.kinds[i] == ChannelKind::magnetometer ? "\"mag\""
                                                               : "\"grad\"");
  }
  out << "],\n\"gradiometer_baseline\":"
      << format_double(file.sensors.baseline);
  out << ",\n\"gradiometer_dirs\":";
  write_vec3_array(out, file.sensors.grad_dirs);
  out << "\n}\n";
  if (!out) throw ConfigError("short write on head model: " + path);
}

HeadModelFile load_head_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read head model: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed head model JSON: " + std::string(e.what()));
  }
  if (j.value("format", "") != "head-model")
    throw ConfigError("not a head-model file: " + path);

  HeadModelFile file;
  file.seed = j.at("seed").get<std::uint64_t>();
  std::map<std::string, std::string> kv;
  for (const auto& [key, value] : j.at("config").items())
    kv[key] = value.get<std::string>();
  file.config = from_kv(kv);

  file.space.conductor_radius = j.at("conductor_radius").get<double>();
  file.space.positions = read_vec3_array(j.at("positions"), "positions");
  file.space.orientations =
      read_vec3_array(j.at("orientations"), "orientations");
  file.space.region_of = j.at("region_of").get<std::vector<int>>();

  const int n = file.space.n_dipoles();
  if (static_cast<int>(file.space.region_of.size()) != n ||
      file.space.orientations.cols() != n)
    throw ConfigError("head model arrays disagree on dipole count");
  int n_regions = file.config.n_regions;
  for (int l : file.space.region_of) n_regions = std::max(n_regions, l + 1);
  file.space.region_members.assign(n_regions, {});
  for (int k = 0; k < n; ++k) {
    if (file.space.region_of[k] < 0)
      throw ConfigError("negative region index in head model");
    file.space.region_members[file.space.region_of[k]].push_back(k);
  }

  file.sensors.positions =
      read_vec3_array(j.at("sensor_positions"), "sensor_positions");
  file.sensors.axes = read_vec3_array(j.at("sensor_axes"), "sensor_axes");
  if (file.sensors.axes.cols() != file.sensors.positions.cols())
    throw ConfigError("head model arrays disagree on channel count");
  file.sensors.baseline = j.value("gradiometer_baseline", 0.0);
  if (j.contains("gradiometer_dirs"))
    file.sensors.grad_dirs =
        read_vec3_array(j.at("gradiometer_dirs"), "gradiometer_dirs");
  else
    file.sensors.grad_dirs =
        Eigen::Matrix3Xd::Zero(3, file.sensors.positions.cols());
  file.sensors.kinds.assign(file.sensors.positions.cols(),
                            ChannelKind::magnetometer);
  if (j.contains("sensor_kinds")) {
    const auto& kinds = j.at("sensor_kinds");
    for (std::size_t i = 0; i < kinds.size(); ++i)
      if (kinds[i].get<std::string>() == "grad")
        file.sensors.kinds[i] = ChannelKind::planar_gradiometer;
  }
  return file;
}

}  // namespace megdict
