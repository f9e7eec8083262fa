#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "dsr/common.hpp"
#include "dsr/scene.hpp"

namespace dsr {

// Dimensions of a stacked measurement cube. Canonical flattening runs
// q, m, n, k, n_s from slowest to fastest, so each sensor's samples are
// contiguous and fast-time is innermost.
struct CubeDims {
  int q = 0;   // radar units
  int m = 0;   // rx elements
  int n = 0;   // tx elements
  int k = 0;   // chirps per frame
  int ns = 0;  // fast-time samples

  std::size_t total() const {
    return static_cast<std::size_t>(q) * m * n * k * ns;
  }
  std::size_t per_sensor() const {
    return static_cast<std::size_t>(m) * n * k * ns;
  }
  std::size_t flat(int qi, int mi, int ni, int ki, int nsi) const {
    return ((((static_cast<std::size_t>(qi) * m + mi) * n + ni) * k + ki) *
                ns +
            nsi);
  }
  bool operator==(const CubeDims&) const = default;
};

inline CubeDims cube_dims(const Scene& scene) {
  const RadarUnit& r = scene.radars.front();
  return CubeDims{scene.n_radars(), r.n_rx(), r.n_tx(), r.n_chirps,
                  r.fast_time_samples()};
}

struct BasebandCube {
  CubeDims dims;
  double sample_period_s = 0.0;
  CVec samples;

  cplx& at(int q, int m, int n, int k, int ns) {
    return samples[static_cast<Eigen::Index>(dims.flat(q, m, n, k, ns))];
  }
  cplx at(int q, int m, int n, int k, int ns) const {
    return samples[static_cast<Eigen::Index>(dims.flat(q, m, n, k, ns))];
  }
  // Contiguous view of one sensor's samples.
  Eigen::VectorBlock<const CVec> sensor_block(int q) const {
    return samples.segment(static_cast<Eigen::Index>(dims.per_sensor()) * q,
                           static_cast<Eigen::Index>(dims.per_sensor()));
  }
};

struct NoiseSpec {
  double variance = 0.0;  // total complex variance per sample
  std::uint64_t seed = 0;
};

namespace detail {

// Phase of one steering sample: carrier delay term, fast-time range+Doppler
// term, and slow-time Doppler term. slot = n + k*N counts TDM pulses.
inline double steering_phase(const RadarUnit& r, double g, double v, int slot,
                             int ns) {
  const double fc = r.carrier_hz;
  const double doppler_hz = 2.0 * fc * v / kSpeedOfLight;
  const double beat_hz = r.modulation_rate() * g / kSpeedOfLight;
  const double t_fast = ns * r.sample_period_s();
  return -kTwoPi * (fc * g / kSpeedOfLight + (doppler_hz + beat_hz) * t_fast +
                    doppler_hz * r.pri_s * slot);
}

}  // namespace detail

// One sample of the noise-free steering response h_{q,m,n}(n_s, k) for a
// point target at p. Indices are zero-based.
inline cplx steering_element(const Scene& scene, int q, int m, int n, int k,
                             int ns, const Vec3& p) {
  const RadarUnit& r = scene.radars.at(q);
  const double g = bistatic_range(scene, q, m, n, p);
  const double v = direction_and_doppler(scene, q, p).speed;
  const int slot = n + k * r.n_tx();
  return std::polar(1.0, detail::steering_phase(r, g, v, slot, ns));
}

// Per-sensor timing-offset phase factor c_q = exp(-j 2 pi f_c (2 v_q / c) s).
// The offset defaults to the radar's own sync_offset_s.
inline cplx sync_phase(const RadarUnit& radar, double v_q, double offset_s) {
  return std::polar(1.0, -kTwoPi * radar.carrier_hz *
                             (2.0 * v_q / kSpeedOfLight) * offset_s);
}
inline cplx sync_phase(const RadarUnit& radar, double v_q) {
  return sync_phase(radar, v_q, radar.sync_offset_s);
}

// Steering vector of sensor q over its m, n, k, n_s block (canonical order).
inline CVec steering_vector_sensor(const Scene& scene, int q, const Vec3& p) {
  const RadarUnit& r = scene.radars.at(q);
  const int M = r.n_rx(), N = r.n_tx(), K = r.n_chirps,
            Ns = r.fast_time_samples();
  CVec h(static_cast<Eigen::Index>(M) * N * K * Ns);
  const double v = direction_and_doppler(scene, q, p).speed;
  Eigen::Index idx = 0;
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      const double g = bistatic_range(scene, q, m, n, p);
      for (int k = 0; k < K; ++k) {
        const int slot = n + k * N;
        for (int ns = 0; ns < Ns; ++ns) {
          h[idx++] = std::polar(1.0, detail::steering_phase(r, g, v, slot, ns));
        }
      }
    }
  }
  return h;
}

// Full stacked steering vector h(p) across all sensors.
inline CVec steering_vector(const Scene& scene, const Vec3& p) {
  const CubeDims d = cube_dims(scene);
  CVec h(static_cast<Eigen::Index>(d.total()));
  for (int q = 0; q < d.q; ++q) {
    h.segment(static_cast<Eigen::Index>(d.per_sensor()) * q,
              static_cast<Eigen::Index>(d.per_sensor())) =
        steering_vector_sensor(scene, q, p);
  }
  return h;
}

// Adds circular complex Gaussian noise. Streams are keyed per (q, m, n, k),
// so the result is independent of traversal order and thread count.
inline void add_noise(BasebandCube& cube, const NoiseSpec& spec) {
  if (spec.variance < 0) {
    throw std::invalid_argument("add_noise: variance must be >= 0");
  }
  if (spec.variance == 0.0) return;
  const CubeDims& d = cube.dims;
  for (int q = 0; q < d.q; ++q) {
    for (int m = 0; m < d.m; ++m) {
      for (int n = 0; n < d.n; ++n) {
        for (int k = 0; k < d.k; ++k) {
          StreamRng rng(spec.seed, static_cast<std::uint64_t>(q),
                        static_cast<std::uint64_t>(m),
                        static_cast<std::uint64_t>(n),
                        static_cast<std::uint64_t>(k));
          for (int ns = 0; ns < d.ns; ++ns) {
            cube.at(q, m, n, k, ns) += rng.cnormal(spec.variance);
          }
        }
      }
    }
  }
}

// Noise variance achieving the requested SNR against a signal power:
// 10 log10(signal_power / variance) = snr_db.
inline double snr_to_variance(double snr_db, double signal_power) {
  if (!(signal_power > 0)) {
    throw std::invalid_argument("snr_to_variance: signal_power must be > 0");
  }
  return signal_power * std::pow(10.0, -snr_db / 10.0);
}

inline double mean_power(const BasebandCube& cube) {
  if (cube.samples.size() == 0) return 0.0;
  return cube.samples.squaredNorm() / static_cast<double>(cube.samples.size());
}

// Sum of target returns with per-sensor reflectivities; each sensor's return
// carries its own timing-offset phase factor. Noise is added last.
inline BasebandCube synthesize_noncoherent(const Scene& scene,
                                           const NoiseSpec& noise) {
  scene.validate();
  BasebandCube cube;
  cube.dims = cube_dims(scene);
  cube.sample_period_s = scene.radars.front().sample_period_s();
  cube.samples = CVec::Zero(static_cast<Eigen::Index>(cube.dims.total()));
  const std::size_t per = cube.dims.per_sensor();
  for (const Target& t : scene.targets) {
    for (int q = 0; q < cube.dims.q; ++q) {
      const RadarUnit& r = scene.radars[q];
      const double v = direction_and_doppler(scene, q, t.position).speed;
      const cplx alpha_eff = t.reflectivity[q] * sync_phase(r, v);
      cube.samples.segment(static_cast<Eigen::Index>(per) * q,
                           static_cast<Eigen::Index>(per)) +=
          alpha_eff * steering_vector_sensor(scene, q, t.position);
    }
  }
  add_noise(cube, noise);
  return cube;
}

// Coherent variant: demands a single reflectivity shared by all sensors per
// target, then synthesizes the identical model.
inline BasebandCube synthesize_coherent(const Scene& scene,
                                        const NoiseSpec& noise) {
  for (std::size_t t = 0; t < scene.targets.size(); ++t) {
    const auto& refl = scene.targets[t].reflectivity;
    for (std::size_t q = 1; q < refl.size(); ++q) {
      if (refl[q] != refl[0]) {
        throw std::invalid_argument(
            "synthesize_coherent: target " + std::to_string(t) +
            " has sensor-dependent reflectivity; coherent model requires one "
            "shared value");
      }
    }
  }
  return synthesize_noncoherent(scene, noise);
}

}  // namespace dsr
