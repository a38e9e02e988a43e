#include "megdict/head_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "megdict/errors.hpp"

namespace megdict {

namespace {
constexpr double k_mu0_over_4pi = 1e-7;  // T m / A
}

Eigen::Matrix3Xd fibonacci_sphere(int n) {
  Eigen::Matrix3Xd pts(3, n);
  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    pts.col(i) << rho * std::cos(phi), rho * std::sin(phi), z;
  }
  return pts;
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Vector4d q;
  double norm2;
  do {
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    norm2 = q.squaredNorm();
  } while (norm2 < 1e-12);
  q /= std::sqrt(norm2);
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d rot;
  rot << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return rot;
}

namespace {

// Farthest-point seeding over the dipole cloud; ties by lowest index.
std::vector<int> farthest_point_seeds(const Eigen::Matrix3Xd& pts,
                                      int n_seeds, Rng& rng) {
  const int n = static_cast<int>(pts.cols());
  std::vector<int> seeds;
  seeds.reserve(n_seeds);
  seeds.push_back(static_cast<int>(rng.uniform_int(n)));
  Eigen::VectorXd min_d2 =
      (pts.colwise() - pts.col(seeds[0])).colwise().squaredNorm();
  while (static_cast<int>(seeds.size()) < n_seeds) {
    int best = 0;
    double best_d2 = -1.0;
    for (int i = 0; i < n; ++i) {
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    seeds.push_back(best);
    min_d2 = min_d2.cwiseMin(
        (pts.colwise() - pts.col(best)).colwise().squaredNorm().transpose());
  }
  return seeds;
}

}  // namespace

SourceSpace build_source_space(int n_dipoles, int n_regions,
                               const GeometryConfig& geom,
                               std::uint64_t seed) {
  if (n_regions < 1 || n_dipoles < n_regions)
    throw ConfigError("need 1 <= n_regions <= n_dipoles");
  if (!(geom.source_radius > 0.0) ||
      geom.source_radius >= geom.conductor_radius)
    throw ConfigError("source shell must satisfy 0 < radius < conductor");

  Rng rng(seed);
  SourceSpace space;
  space.conductor_radius = geom.conductor_radius;
  space.positions =
      geom.source_radius * (random_rotation(rng) * fibonacci_sphere(n_dipoles));

  space.orientations.resize(3, n_dipoles);
  for (int k = 0; k < n_dipoles; ++k) {
    const Eigen::Vector3d radial = space.positions.col(k).normalized();
    Eigen::Vector3d t;
    double norm;
    do {
      Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
      t = v - radial.dot(v) * radial;
      norm = t.norm();
    } while (norm < 1e-12);
    space.orientations.col(k) = t / norm;
  }

  const std::vector<int> seeds =
      farthest_point_seeds(space.positions, n_regions, rng);
  space.region_of.assign(n_dipoles, 0);
  space.region_members.assign(n_regions, {});
  for (int k = 0; k < n_dipoles; ++k) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int l = 0; l < n_regions; ++l) {
      const double d2 = (space.positions.col(k) - space.positions.col(seeds[l]))
                            .squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = l;
      }
    }
    space.region_of[k] = best;
    space.region_members[best].push_back(k);
  }
  // Farthest-point seeds are themselves dipoles, so every region holds at
  // least its own seed.
  return space;
}

SensorArray build_sensors(int n_channels, const GeometryConfig& geom) {
  if (n_channels < 1) throw ConfigError("need at least one channel");
  if (geom.sensor_radius <= geom.conductor_radius)
    throw ConfigError("sensors must lie strictly outside the conductor");
  SensorArray sensors;
  sensors.positions = geom.sensor_radius * fibonacci_sphere(n_channels);
  sensors.axes.resize(3, n_channels);
  sensors.grad_dirs = Eigen::Matrix3Xd::Zero(3, n_channels);
  sensors.kinds.assign(n_channels, ChannelKind::magnetometer);
  sensors.baseline = geom.gradiometer_baseline;
  for (int i = 0; i < n_channels; ++i) {
    const Eigen::Vector3d radial = sensors.positions.col(i).normalized();
    sensors.axes.col(i) = radial;
    if (geom.gradiometers && (i % 2 == 1)) {
      sensors.kinds[i] = ChannelKind::planar_gradiometer;
      // Deterministic tangent at the site.
      Eigen::Vector3d ref = std::abs(radial.z()) < 0.9
                                ? Eigen::Vector3d::UnitZ()
                                : Eigen::Vector3d::UnitX();
      sensors.grad_dirs.col(i) = radial.cross(ref).normalized();
    }
  }
  return sensors;
}

Eigen::RowVector3d lead_row(const Eigen::Vector3d& dipole_pos,
                            const Eigen::Vector3d& sensor_pos,
                            const Eigen::Vector3d& sensor_axis) {
  const Eigen::Vector3d a_vec = sensor_pos - dipole_pos;
  const double a = a_vec.norm();
  const double r = sensor_pos.norm();
  const double ar = a_vec.dot(sensor_pos);
  const double f = a * (r * a + r * r - dipole_pos.dot(sensor_pos));
  if (f == 0.0)
    throw NumericalError("degenerate sensor/source configuration (F = 0)");
  const Eigen::Vector3d grad_f =
      (a * a / r + ar / a + 2.0 * a + 2.0 * r) * sensor_pos -
      (a + 2.0 * r + ar / a) * dipole_pos;
  // reading = s . B(q) is linear in q; collecting the closed form gives
  // row = mu0/(4 pi F^2) * (r_q x (F s - (grad F . s) r))^T.
  const Eigen::Vector3d inner =
      f * sensor_axis - grad_f.dot(sensor_axis) * sensor_pos;
  return (k_mu0_over_4pi / (f * f)) * dipole_pos.cross(inner).transpose();
}

Eigen::RowVector3d channel_lead_row(const Eigen::Vector3d& dipole_pos,
                                    const SensorArray& sensors, int channel) {
  const Eigen::Vector3d pos = sensors.positions.col(channel);
  const Eigen::Vector3d axis = sensors.axes.col(channel);
  if (sensors.kinds[channel] == ChannelKind::magnetometer)
    return lead_row(dipole_pos, pos, axis);
  const Eigen::Vector3d shift =
      0.5 * sensors.baseline * sensors.grad_dirs.col(channel);
  return (lead_row(dipole_pos, pos + shift, axis) -
          lead_row(dipole_pos, pos - shift, axis)) /
         sensors.baseline;
}

Eigen::MatrixXd gain_matrix(const SourceSpace& space,
                            const SensorArray& sensors) {
  const int m = sensors.n_channels();
  const int n = space.n_dipoles();
  Eigen::MatrixXd gain(m, n);
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector3d pos = space.positions.col(k);
    const Eigen::Vector3d q = space.orientations.col(k);
    for (int i = 0; i < m; ++i)
      gain(i, k) = channel_lead_row(pos, sensors, i).dot(q);
  }
  return gain;
}

Activation simulate_patch(const SourceSpace& space, int region, Rng& rng) {
  if (region < 0 || region >= space.n_regions())
    throw ConfigError("region index out of range");
  const std::vector<int>& members = space.region_members[region];
  const int seed_dipole =
      members[rng.uniform_int(members.size())];

  std::vector<std::pair<double, int>> by_dist;
  by_dist.reserve(members.size());
  for (int k : members)
    by_dist.emplace_back(
        (space.positions.col(k) - space.positions.col(seed_dipole))
            .squaredNorm(),
        k);
  std::sort(by_dist.begin(), by_dist.end());

  Activation act;
  act.region = region;
  const int patch_size = std::min<int>(6, static_cast<int>(members.size()));
  for (int i = 0; i < patch_size; ++i)
    act.dipole_indices.push_back(by_dist[i].second);
  for (int i = 0; i < patch_size; ++i)
    act.amplitudes.push_back(rng.uniform());
  return act;
}

Measurement measure(const SourceSpace& space, const SensorArray& sensors,
                    const Activation& activation, double noise_fraction,
                    Rng& rng) {
  if (noise_fraction < 0.0) throw ConfigError("noise_fraction must be >= 0");
  const int m = sensors.n_channels();
  Measurement meas;
  meas.b_clean = Eigen::VectorXd::Zero(m);
  double row_scale = 0.0;  // largest |row|*amplitude seen, for the silence test
  for (std::size_t j = 0; j < activation.dipole_indices.size(); ++j) {
    const int k = activation.dipole_indices[j];
    const Eigen::Vector3d moment =
        activation.amplitudes[j] * space.orientations.col(k);
    const Eigen::Vector3d pos = space.positions.col(k);
    for (int i = 0; i < m; ++i) {
      const Eigen::RowVector3d row = channel_lead_row(pos, sensors, i);
      meas.b_clean[i] += row.dot(moment);
      row_scale = std::max(row_scale, row.norm() * activation.amplitudes[j]);
    }
  }
  const double peak = meas.b_clean.cwiseAbs().maxCoeff();
  // A field twelve orders below the lead-field scale is rounding residue,
  // not signal (e.g. radial moments, whose true field vanishes). Zero
  // amplitudes give row_scale = 0 and are caught by the same comparison.
  if (peak <= 1e-12 * row_scale)
    throw SilentSourceError("patch produces no measurable field");

  meas.noise_std = noise_fraction * peak;
  meas.b_noisy = meas.b_clean;
  if (meas.noise_std > 0.0)
    for (int i = 0; i < m; ++i) meas.b_noisy[i] += meas.noise_std * rng.normal();
  meas.y = meas.b_noisy / meas.b_noisy.norm();
  return meas;
}

}  // namespace megdict
