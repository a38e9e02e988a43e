#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "megdict/rng.hpp"

namespace megdict {

struct GeometryConfig {
  double source_radius = 0.079;     // dipole shell [m]
  double conductor_radius = 0.09;   // spherical conductor [m]
  double sensor_radius = 0.11;      // sensor shell [m]
  bool gradiometers = false;        // odd channels become planar gradiometers
  double gradiometer_baseline = 0.0168;  // [m]
};

struct SourceSpace {
  Eigen::Matrix3Xd positions;     // 3 x n, inside the conductor
  Eigen::Matrix3Xd orientations;  // 3 x n, unit tangential directions
  std::vector<int> region_of;     // dipole -> region in [0, L)
  std::vector<std::vector<int>> region_members;
  double conductor_radius = 0.09;

  int n_dipoles() const { return static_cast<int>(positions.cols()); }
  int n_regions() const { return static_cast<int>(region_members.size()); }
};

enum class ChannelKind { magnetometer, planar_gradiometer };

struct SensorArray {
  Eigen::Matrix3Xd positions;   // 3 x m, outside the conductor
  Eigen::Matrix3Xd axes;        // 3 x m, unit measurement directions
  std::vector<ChannelKind> kinds;
  Eigen::Matrix3Xd grad_dirs;   // 3 x m, offset direction for gradiometers
  double baseline = 0.0;        // gradiometer baseline [m]

  int n_channels() const { return static_cast<int>(positions.cols()); }
};

struct Activation {
  int region = -1;
  std::vector<int> dipole_indices;  // patch members, all in `region`
  std::vector<double> amplitudes;   // in [0, 1]
};

struct Measurement {
  Eigen::VectorXd b_clean;
  Eigen::VectorXd b_noisy;
  double noise_std = 0.0;
  Eigen::VectorXd y;  // b_noisy normalized to unit length
};

// Quasi-uniform unit sphere points (golden-angle lattice).
Eigen::Matrix3Xd fibonacci_sphere(int n);

// Random rotation matrix (uniform over SO(3) via normalized quaternion).
Eigen::Matrix3d random_rotation(Rng& rng);

// Dipoles on a randomly rotated shell, tangential random orientations,
// farthest-point-seeded nearest-center regions.
SourceSpace build_source_space(int n_dipoles, int n_regions,
                               const GeometryConfig& geom,
                               std::uint64_t seed);

// Radial-axis sensor lattice on the sensor shell.
SensorArray build_sensors(int n_channels, const GeometryConfig& geom);

// Row mapping a dipole moment at `dipole_pos` to the reading of a single
// magnetometer channel: reading = row . q. Spherical-conductor closed form;
// the conductor center is the origin.
Eigen::RowVector3d lead_row(const Eigen::Vector3d& dipole_pos,
                            const Eigen::Vector3d& sensor_pos,
                            const Eigen::Vector3d& sensor_axis);

// One full channel row, honoring the channel kind (gradiometers read the
// finite difference of two offset magnetometer readings over the baseline).
Eigen::RowVector3d channel_lead_row(const Eigen::Vector3d& dipole_pos,
                                    const SensorArray& sensors, int channel);

// m x n gain matrix; column k is the field of unit-amplitude dipole k along
// its preferential orientation.
Eigen::MatrixXd gain_matrix(const SourceSpace& space,
                            const SensorArray& sensors);

// Random seed dipole plus its nearest in-region neighbors (patch size <= 6),
// i.i.d. uniform [0,1] amplitudes.
Activation simulate_patch(const SourceSpace& space, int region, Rng& rng);

// Clean field of the patch, additive white noise scaled to the peak channel,
// and the unit-norm query vector. Throws SilentSourceError when the clean
// field vanishes.
Measurement measure(const SourceSpace& space, const SensorArray& sensors,
                    const Activation& activation, double noise_fraction,
                    Rng& rng);

}  // namespace megdict
