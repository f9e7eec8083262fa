#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dsr/common.hpp"

namespace dsr {

// One FMCW MIMO radar unit. Antenna phase centers are origin + offset; the
// stored position_error is a diagnostic quantity and never enters geometry.
struct RadarUnit {
  Vec3 origin = Vec3::Zero();
  std::vector<Vec3> tx_offsets;
  std::vector<Vec3> rx_offsets;
  Vec3 position_error = Vec3::Zero();

  double carrier_hz = 77e9;
  double bandwidth_hz = 500e6;  // swept bandwidth B_r * T_p
  double chirp_s = 5e-6;        // active chirp duration T_p
  double pri_s = 30e-6;         // pulse repetition interval T_r
  double fs_hz = 30e6;          // complex sampling rate
  int n_chirps = 10;            // chirps per TDM frame, K
  double sync_offset_s = 0.0;   // timing offset sigma_q

  int n_tx() const { return static_cast<int>(tx_offsets.size()); }
  int n_rx() const { return static_cast<int>(rx_offsets.size()); }

  // Chirp slope in Hz/s.
  double modulation_rate() const { return bandwidth_hz / chirp_s; }
  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  double sample_period_s() const { return 1.0 / fs_hz; }
  int fast_time_samples() const {
    return static_cast<int>(std::floor(fs_hz * chirp_s));
  }

  Vec3 tx_position(int n) const { return origin + tx_offsets.at(n); }
  Vec3 rx_position(int m) const { return origin + rx_offsets.at(m); }

  void validate() const {
    std::vector<std::string> bad;
    if (tx_offsets.empty()) bad.push_back("tx_offsets empty");
    if (rx_offsets.empty()) bad.push_back("rx_offsets empty");
    if (!(carrier_hz > 0)) bad.push_back("carrier_hz must be positive");
    if (!(bandwidth_hz > 0)) bad.push_back("bandwidth_hz must be positive");
    if (!(chirp_s > 0)) bad.push_back("chirp_s must be positive");
    if (!(pri_s >= chirp_s)) bad.push_back("pri_s must be >= chirp_s");
    if (!(fs_hz > 0)) bad.push_back("fs_hz must be positive");
    if (n_chirps < 1) bad.push_back("n_chirps must be >= 1");
    if (fast_time_samples() < 1) bad.push_back("fs_hz*chirp_s yields no samples");
    if (!bad.empty()) {
      std::string msg = "RadarUnit invalid:";
      for (const auto& b : bad) msg += " [" + b + "]";
      throw std::invalid_argument(msg);
    }
  }
};

// Point scatterer with one complex reflectivity per radar unit.
struct Target {
  Vec3 position = Vec3::Zero();
  std::vector<cplx> reflectivity;
};

struct Scene {
  std::vector<RadarUnit> radars;
  std::vector<Target> targets;
  Vec3 ego_velocity = Vec3::Zero();

  int n_radars() const { return static_cast<int>(radars.size()); }

  // All radars must share the TDM frame layout so cubes stack canonically.
  void validate() const {
    if (radars.empty()) throw std::invalid_argument("Scene: no radars");
    std::vector<std::string> bad;
    const RadarUnit& r0 = radars.front();
    for (std::size_t q = 0; q < radars.size(); ++q) {
      try {
        radars[q].validate();
      } catch (const std::invalid_argument& e) {
        bad.push_back("radar " + std::to_string(q) + ": " + e.what());
        continue;
      }
      const RadarUnit& r = radars[q];
      if (r.n_tx() != r0.n_tx() || r.n_rx() != r0.n_rx())
        bad.push_back("radar " + std::to_string(q) + ": antenna counts differ");
      if (r.n_chirps != r0.n_chirps)
        bad.push_back("radar " + std::to_string(q) + ": n_chirps differs");
      if (r.fast_time_samples() != r0.fast_time_samples())
        bad.push_back("radar " + std::to_string(q) + ": fast-time samples differ");
      if (r.pri_s != r0.pri_s)
        bad.push_back("radar " + std::to_string(q) + ": pri_s differs");
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (targets[t].reflectivity.size() != radars.size())
        bad.push_back("target " + std::to_string(t) +
                      ": reflectivity length != radar count");
    }
    if (!bad.empty()) {
      std::string msg = "Scene invalid:";
      for (const auto& b : bad) msg += " [" + b + "]";
      throw std::invalid_argument(msg);
    }
  }

  // Reduced scene containing radar q only (reflectivities subset to match).
  Scene single_sensor(int q) const {
    Scene s;
    s.ego_velocity = ego_velocity;
    s.radars.push_back(radars.at(q));
    for (const Target& t : targets) {
      Target tt;
      tt.position = t.position;
      tt.reflectivity.push_back(t.reflectivity.at(q));
      s.targets.push_back(std::move(tt));
    }
    return s;
  }

  // True when every element and target lies in the z = 0 plane; bounds then
  // use 2-D position blocks and drop elevation measurements.
  bool is_planar() const {
    const auto flat = [](double z) { return z == 0.0; };
    for (const RadarUnit& r : radars) {
      if (!flat(r.origin.z())) return false;
      for (const Vec3& o : r.tx_offsets)
        if (!flat(o.z())) return false;
      for (const Vec3& o : r.rx_offsets)
        if (!flat(o.z())) return false;
    }
    for (const Target& t : targets)
      if (!flat(t.position.z())) return false;
    return true;
  }

  std::size_t samples_per_sensor() const {
    const RadarUnit& r = radars.front();
    return static_cast<std::size_t>(r.n_rx()) * r.n_tx() * r.n_chirps *
           r.fast_time_samples();
  }
  std::size_t total_samples() const {
    return samples_per_sensor() * radars.size();
  }
};

// Sum of tx->target and target->rx path lengths for radar q, rx m, tx n.
// The stored per-radar position error is deliberately not applied.
inline double bistatic_range(const Scene& scene, int q, int m, int n,
                             const Vec3& p) {
  const RadarUnit& r = scene.radars.at(q);
  const double d_tx = (p - r.tx_position(n)).norm();
  const double d_rx = (p - r.rx_position(m)).norm();
  if (d_tx == 0.0 || d_rx == 0.0) {
    throw DegenerateGeometryError(
        "bistatic_range: target coincides with an antenna phase center");
  }
  return d_tx + d_rx;
}

struct DirectionDoppler {
  Vec3 unit;     // unit vector from radar origin toward the target
  double speed;  // closing speed v_q = ego_velocity . unit (positive closing)
};

inline DirectionDoppler direction_and_doppler(const Scene& scene, int q,
                                              const Vec3& p) {
  const RadarUnit& r = scene.radars.at(q);
  const Vec3 d = p - r.origin;
  const double dist = d.norm();
  if (dist == 0.0) {
    throw DegenerateGeometryError(
        "direction_and_doppler: target coincides with radar origin");
  }
  DirectionDoppler out;
  out.unit = d / dist;
  out.speed = scene.ego_velocity.dot(out.unit);
  return out;
}

// Azimuth measured in the x-y plane from the +x axis; elevation measured
// against the ground-range. Returns radians.
inline std::pair<double, double> azimuth_elevation(const Vec3& radar_origin,
                                                   const Vec3& p) {
  const Vec3 d = p - radar_origin;
  const double ground = std::hypot(d.x(), d.y());
  if (ground == 0.0 && d.z() == 0.0) {
    throw DegenerateGeometryError(
        "azimuth_elevation: target coincides with radar origin");
  }
  if (ground == 0.0) {
    throw DegenerateGeometryError(
        "azimuth_elevation: azimuth undefined directly above radar");
  }
  const double az = std::atan2(d.y(), d.x());
  const double el = std::atan2(d.z(), ground);
  return {az, el};
}

// Magnitude of the two-way range perturbation a radar position error would
// induce; reported for diagnostics only.
inline double neglected_position_error_m(const Scene& scene, int q,
                                         const Vec3& p) {
  const DirectionDoppler dd = direction_and_doppler(scene, q, p);
  return 2.0 * std::abs(scene.radars.at(q).position_error.dot(dd.unit));
}

}  // namespace dsr
