#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "megdict/config.hpp"
#include "megdict/head_model.hpp"

namespace megdict {

// Binary matrix container: "MDMX" magic, u32 version, u64 rows, u64 cols,
// row-major IEEE float64 payload, little-endian.
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

// Plain CSV (no header); doubles with 17 significant digits.
void write_csv(const std::string& path, const Eigen::MatrixXd& m);
void write_csv(const std::string& path, const Eigen::MatrixXi& m);
Eigen::MatrixXd read_csv(const std::string& path);

// Column vector from .csv/.txt (one value per line) or the binary container.
Eigen::VectorXd read_vector(const std::string& path);

// Shortest form that parses back to the same double, capped at 17
// significant digits.
std::string format_double(double v);

// Strict inverse of format_double (exact for anything it printed, including
// subnormals, which stod refuses on glibc). Throws ConfigError on garbage.
double parse_double(const std::string& text);

// Head-model JSON document: positions, orientations, region_of,
// sensor_positions, sensor_axes, config echo, seed.
struct HeadModelFile {
  SourceSpace space;
  SensorArray sensors;
  ProtocolConfig config;
  std::uint64_t seed = 0;
};
void save_head_model(const std::string& path, const HeadModelFile& file);
HeadModelFile load_head_model(const std::string& path);

void ensure_dir(const std::string& path);

}  // namespace megdict
