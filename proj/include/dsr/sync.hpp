#pragma once

// Online estimation of per-sensor time-synchronization offsets. A strong,
// isolated detection from a coarse non-coherent image anchors a per-sensor
// matched-filter amplitude estimate; the phase progression of those
// amplitudes across sensors encodes the timing offsets through the
// velocity-dependent factor c_q, which is inverted here so a coherent
// dictionary can be built afterwards.

#include "dsr/grid.hpp"
#include "dsr/recovery.hpp"
#include "dsr/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsr {

struct SyncEstimate {
  std::vector<double> offsets_s;    // sigma_hat per sensor; [0] is exactly 0
  std::vector<double> phases_rad;   // arg(c_hat_q) in [-pi, pi]
  std::vector<double> confidence;   // mean |corr| per sensor over anchors
  std::vector<int> anchor_cells;
  // One-sided unambiguous bound per sensor: offsets are only identifiable up
  // to |sigma| < c / (4 f_c |v_q|); no unwrapping is attempted.
  std::vector<double> valid_range_s;
  bool wrap_warning = false;  // some phase landed within 1e-6 of +-pi
};

// Ranks cells of a (block-structured or coherent) sparse image by aggregate
// block magnitude and returns up to `count` of them, keeping only cells at
// least min_isolation_m away from every stronger detection. Ties in
// magnitude rank the lower cell index as stronger.
inline std::vector<int> select_anchor(const SparseImage& image,
                                      const ImagingGrid& grid,
                                      double min_isolation_m, int count) {
  if (count < 1) {
    throw std::invalid_argument("select_anchor: count must be >= 1");
  }
  if (min_isolation_m < 0.0) {
    throw std::invalid_argument(
        "select_anchor: min_isolation_m must be >= 0");
  }
  const int n_cells = grid.size();
  if (n_cells == 0 || image.coefficients.size() % n_cells != 0) {
    throw std::invalid_argument(
        "select_anchor: image length is not a multiple of the grid size");
  }
  const std::ptrdiff_t q = image.coefficients.size() / n_cells;

  std::vector<std::pair<double, int>> ranked;  // (magnitude, cell)
  for (int l = 0; l < n_cells; ++l) {
    const double mag =
        image.coefficients.segment(static_cast<std::ptrdiff_t>(l) * q, q)
            .norm();
    if (mag > 0.0) ranked.emplace_back(mag, l);
  }
  if (ranked.empty()) {
    throw NoAnchorError("select_anchor: image has no detections");
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  std::vector<int> anchors;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const Vec3 p = grid.cell_position(ranked[i].second);
    bool isolated = true;
    for (std::size_t j = 0; j < i; ++j) {
      const Vec3 d = grid.cell_position(ranked[j].second) - p;
      if (d.norm() < min_isolation_m) {
        isolated = false;
        break;
      }
    }
    if (isolated) {
      anchors.push_back(ranked[i].second);
      if (static_cast<int>(anchors.size()) == count) break;
    }
  }
  if (anchors.empty()) {
    throw NoAnchorError(
        "select_anchor: no detection satisfies the isolation rule");
  }
  return anchors;
}

// Estimates per-sensor timing offsets from the raw stacked cube `data` and
// known anchor cells. Per sensor and anchor the matched-filter amplitude is
// alpha_hat = h^H z / ||h||^2 at the anchor's cell center; the phase of
// alpha_hat_q / alpha_hat_1 is a circular mean across anchors and converts
// to sigma_hat_q through the sensor's carrier and mean anchor LOS speed.
// Sensor 1 is the timing reference, so offsets_s[0] is exactly zero.
inline SyncEstimate estimate_offsets(const Scene& scene, const CVec& data,
                                     const ImagingGrid& grid,
                                     const std::vector<int>& anchor_cells) {
  const int n_q = scene.n_radars();
  if (n_q < 1) {
    throw std::invalid_argument("estimate_offsets: scene has no radars");
  }
  if (anchor_cells.empty()) {
    throw std::invalid_argument("estimate_offsets: no anchor cells given");
  }
  std::vector<std::ptrdiff_t> start(static_cast<std::size_t>(n_q) + 1, 0);
  for (int q = 0; q < n_q; ++q) {
    const RadarUnit& r = scene.radars[q];
    start[q + 1] = start[q] + static_cast<std::ptrdiff_t>(r.n_rx()) *
                                  r.n_tx() * r.n_chirps *
                                  r.fast_time_samples();
  }
  if (data.size() != start.back()) {
    throw std::invalid_argument(
        "estimate_offsets: data length does not match the scene's cube");
  }

  const std::size_t n_a = anchor_cells.size();
  CMat amp(n_q, static_cast<std::ptrdiff_t>(n_a));
  RMat speed(n_q, static_cast<std::ptrdiff_t>(n_a));
  RMat corr(n_q, static_cast<std::ptrdiff_t>(n_a));
  for (int q = 0; q < n_q; ++q) {
    const auto z = data.segment(start[q], start[q + 1] - start[q]);
    const double zn = z.norm();
    for (std::size_t a = 0; a < n_a; ++a) {
      const Vec3 p = grid.cell_position(anchor_cells[a]);
      const CVec h = steering_vector_sensor(scene, q, p);
      const cplx proj = h.dot(z);
      amp(q, static_cast<std::ptrdiff_t>(a)) = proj / h.squaredNorm();
      speed(q, static_cast<std::ptrdiff_t>(a)) =
          direction_and_doppler(scene, q, p).speed;
      corr(q, static_cast<std::ptrdiff_t>(a)) =
          zn > 0.0 ? std::abs(proj) / (h.norm() * zn) : 0.0;
    }
  }

  SyncEstimate est;
  est.anchor_cells = anchor_cells;
  est.offsets_s.assign(n_q, 0.0);
  est.phases_rad.assign(n_q, 0.0);
  est.confidence.assign(n_q, 0.0);
  est.valid_range_s.assign(n_q, 0.0);

  for (std::size_t a = 0; a < n_a; ++a) {
    if (amp(0, static_cast<std::ptrdiff_t>(a)) == cplx(0.0)) {
      throw NoAnchorError(
          "estimate_offsets: anchor cell " +
          std::to_string(anchor_cells[a]) +
          " has no reference-sensor energy");
    }
  }

  for (int q = 0; q < n_q; ++q) {
    cplx mean_dir(0.0, 0.0);
    double mean_speed = 0.0;
    double mean_corr = 0.0;
    for (std::size_t a = 0; a < n_a; ++a) {
      const std::ptrdiff_t ai = static_cast<std::ptrdiff_t>(a);
      const cplx ratio = amp(q, ai) / amp(0, ai);
      if (std::abs(ratio) > 0.0) mean_dir += ratio / std::abs(ratio);
      mean_speed += speed(q, ai);
      mean_corr += corr(q, ai);
    }
    mean_speed /= static_cast<double>(n_a);
    mean_corr /= static_cast<double>(n_a);
    const double phase = (q == 0 || mean_dir == cplx(0.0))
                             ? 0.0
                             : std::arg(mean_dir);

    if (q > 0 && std::abs(mean_speed) < 1e-9) {
      throw ObservabilityError(
          "estimate_offsets: anchor LOS speed for sensor " +
          std::to_string(q + 1) +
          " is zero; timing offsets are unobservable without motion");
    }
    est.phases_rad[q] = phase;
    est.confidence[q] = mean_corr;
    if (q > 0) {
      const double fc = scene.radars[q].carrier_hz;
      est.offsets_s[q] =
          -phase * kSpeedOfLight / (2.0 * kTwoPi * fc * mean_speed);
      est.valid_range_s[q] =
          kSpeedOfLight / (2.0 * kTwoPi * fc * std::abs(mean_speed)) * kPi;
      if (std::abs(phase) >= kPi * (1.0 - 1e-6)) est.wrap_warning = true;
    }
  }
  return est;
}

inline SyncEstimate estimate_offsets(const Scene& scene,
                                     const BasebandCube& cube,
                                     const ImagingGrid& grid,
                                     const std::vector<int>& anchor_cells) {
  return estimate_offsets(scene, cube.samples, grid, anchor_cells);
}

// Interference-cancelling variant: every non-anchor detection of the given
// block image is synthesized from its per-sensor coefficients and subtracted
// from the data before the anchor matched filter runs. With several
// scatterers in the scene the raw matched filter at the anchor picks up
// leakage from the others (their cross-range responses are wide per sensor),
// which biases the recovered phase progression; cancelling the jointly-fit
// detections first removes that bias.
inline SyncEstimate estimate_offsets(const Scene& scene, const CVec& data,
                                     const ImagingGrid& grid,
                                     const SparseImage& block_image,
                                     const std::vector<int>& anchor_cells) {
  const int n_q = scene.n_radars();
  const int n_cells = grid.size();
  if (n_cells == 0 ||
      block_image.coefficients.size() !=
          static_cast<std::ptrdiff_t>(n_cells) * n_q) {
    throw std::invalid_argument(
        "estimate_offsets: block image does not match grid x sensor count");
  }
  CVec cleaned = data;
  std::ptrdiff_t row = 0;
  for (int q = 0; q < n_q; ++q) {
    const RadarUnit& r = scene.radars[q];
    const std::ptrdiff_t rows_q = static_cast<std::ptrdiff_t>(r.n_rx()) *
                                  r.n_tx() * r.n_chirps *
                                  r.fast_time_samples();
    for (int l : block_image.support) {
      if (std::count(anchor_cells.begin(), anchor_cells.end(), l) > 0) {
        continue;
      }
      const cplx b =
          block_image
              .coefficients[static_cast<std::ptrdiff_t>(l) * n_q + q];
      if (b == cplx(0.0)) continue;
      cleaned.segment(row, rows_q) -=
          b * steering_vector_sensor(scene, q, grid.cell_position(l));
    }
    row += rows_q;
  }
  return estimate_offsets(scene, cleaned, grid, anchor_cells);
}

}  // namespace dsr
