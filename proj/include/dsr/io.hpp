#pragma once

// File writers for the artifacts the command-line tool produces: grid maps
// as CSV and 8-bit PGM, 1-D response cuts, baseband cubes as raw complex64
// with a text header, sparse-image detections, sync reports, and the NMSE
// table. Every writer formats numbers with a fixed printf spec so a given
// build reproduces files byte-for-byte.

#include "dsr/eval.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace dsr {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  return out;
}

inline void check_write(const std::ofstream& out, const std::string& path) {
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

// Round-trippable, locale-independent double formatting.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Grid map as CSV: header row carries the x coordinates (first field empty),
// each data row starts with its y coordinate. values must be ny x nx.
inline void write_grid_csv(const std::string& path, const ImagingGrid& grid,
                           const RMat& values) {
  if (values.rows() != grid.ny || values.cols() != grid.nx) {
    throw std::invalid_argument("write_grid_csv: values shape != grid");
  }
  std::ofstream out = detail::open_out(path);
  for (int ix = 0; ix < grid.nx; ++ix) {
    out << ',' << detail::num(grid.x_at(ix));
  }
  out << '\n';
  for (int iy = 0; iy < grid.ny; ++iy) {
    out << detail::num(grid.y_at(iy));
    for (int ix = 0; ix < grid.nx; ++ix) {
      out << ',' << detail::num(values(iy, ix));
    }
    out << '\n';
  }
  detail::check_write(out, path);
}

// Grid map as binary 8-bit PGM on a log scale: the peak maps to 255 and
// anything floor_db below it (or non-finite) to 0. Row 0 is the top of the
// image, i.e. the maximum y coordinate.
inline void write_grid_pgm(const std::string& path, const RMat& values,
                           double floor_db = 40.0) {
  if (values.size() == 0 || !(floor_db > 0)) {
    throw std::invalid_argument("write_grid_pgm: empty map or bad floor");
  }
  double peak = 0.0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      if (std::isfinite(v) && v > peak) peak = v;
    }
  }
  if (!(peak > 0.0)) {
    throw std::invalid_argument("write_grid_pgm: no positive values");
  }
  std::ofstream out = detail::open_out(path, true);
  out << "P5\n" << values.cols() << ' ' << values.rows() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index i = values.rows() - 1; i >= 0; --i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      double scale = 0.0;
      if (std::isfinite(v) && v > 0.0) {
        scale = 1.0 + 20.0 * std::log10(v / peak) / floor_db;
        scale = std::min(1.0, std::max(0.0, scale));
      }
      row[static_cast<std::size_t>(j)] =
          static_cast<unsigned char>(std::lround(255.0 * scale));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  detail::check_write(out, path);
}

// 1-D cuts: one coordinate column followed by one column per named series.
inline void write_cuts_csv(const std::string& path,
                           const std::string& coord_name, const RVec& coords,
                           const std::vector<std::string>& names,
                           const std::vector<RVec>& series) {
  if (names.size() != series.size() || names.empty()) {
    throw std::invalid_argument("write_cuts_csv: names/series mismatch");
  }
  for (const RVec& s : series) {
    if (s.size() != coords.size()) {
      throw std::invalid_argument("write_cuts_csv: series length mismatch");
    }
  }
  std::ofstream out = detail::open_out(path);
  out << coord_name;
  for (const std::string& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < coords.size(); ++i) {
    out << detail::num(coords[i]);
    for (const RVec& s : series) out << ',' << detail::num(s[i]);
    out << '\n';
  }
  detail::check_write(out, path);
}

// Baseband cube: <base>.bin holds interleaved complex64 (float32 re, im,
// little-endian host order) in the cube's canonical sample order, and
// <base>.hdr documents the layout.
inline void write_cube(const std::string& base, const BasebandCube& cube) {
  {
    std::ofstream bin = detail::open_out(base + ".bin", true);
    std::vector<float> buf(2 * static_cast<std::size_t>(cube.samples.size()));
    for (Eigen::Index i = 0; i < cube.samples.size(); ++i) {
      buf[2 * static_cast<std::size_t>(i)] =
          static_cast<float>(cube.samples[i].real());
      buf[2 * static_cast<std::size_t>(i) + 1] =
          static_cast<float>(cube.samples[i].imag());
    }
    bin.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    detail::check_write(bin, base + ".bin");
  }
  std::ofstream hdr = detail::open_out(base + ".hdr");
  hdr << "format complex64 interleaved little-endian\n"
      << "order sensor,rx,tx,chirp,fast_time (fast_time innermost)\n"
      << "sensors " << cube.dims.q << '\n'
      << "rx " << cube.dims.m << '\n'
      << "tx " << cube.dims.n << '\n'
      << "chirps " << cube.dims.k << '\n'
      << "fast_time_samples " << cube.dims.ns << '\n'
      << "sample_period_s " << detail::num(cube.sample_period_s) << '\n';
  detail::check_write(hdr, base + ".hdr");
}

// Sparse image detections: one row per support cell (and per sensor for
// block-structured images; sensor -1 marks a common coefficient).
inline void write_image_csv(const std::string& path, const ImagingGrid& grid,
                            const SparseImage& image, int n_sensors) {
  const bool block =
      image.coefficients.size() ==
      static_cast<Eigen::Index>(grid.size()) * n_sensors;
  if (!block && image.coefficients.size() != grid.size()) {
    throw std::invalid_argument("write_image_csv: image length != grid");
  }
  std::ofstream out = detail::open_out(path);
  out << "x_m,y_m,sensor,re,im\n";
  for (int cell : image.support) {
    const Vec3 p = grid.cell_position(cell);
    if (block) {
      for (int q = 0; q < n_sensors; ++q) {
        const cplx c =
            image.coefficients[static_cast<Eigen::Index>(cell) * n_sensors +
                               q];
        out << detail::num(p.x()) << ',' << detail::num(p.y()) << ',' << q
            << ',' << detail::num(c.real()) << ',' << detail::num(c.imag())
            << '\n';
      }
    } else {
      const cplx c = image.coefficients[cell];
      out << detail::num(p.x()) << ',' << detail::num(p.y()) << ",-1,"
          << detail::num(c.real()) << ',' << detail::num(c.imag()) << '\n';
    }
  }
  detail::check_write(out, path);
}

// Sync estimate, one row per sensor.
inline void write_sync_csv(const std::string& path, const SyncEstimate& est) {
  std::ofstream out = detail::open_out(path);
  out << "sensor,offset_s,phase_rad,confidence,valid_range_s\n";
  for (std::size_t q = 0; q < est.offsets_s.size(); ++q) {
    const double valid =
        q < est.valid_range_s.size() ? est.valid_range_s[q] : 0.0;
    const double conf = q < est.confidence.size() ? est.confidence[q] : 0.0;
    const double phase = q < est.phases_rad.size() ? est.phases_rad[q] : 0.0;
    out << q << ',' << detail::num(est.offsets_s[q]) << ','
        << detail::num(phase) << ',' << detail::num(conf) << ','
        << detail::num(valid) << '\n';
  }
  detail::check_write(out, path);
}

// NMSE table mirroring the published layout: one row per (SNR, metric) pair
// with one column per scheme, plus trial bookkeeping.
inline void write_nmse_csv(const std::string& path, const NmseTable& table) {
  // Scheme columns in first-appearance order.
  std::vector<Scheme> schemes;
  std::vector<double> snrs;
  for (const NmseRow& r : table.rows) {
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) {
      schemes.push_back(r.scheme);
    }
    if (std::find(snrs.begin(), snrs.end(), r.snr_db) == snrs.end()) {
      snrs.push_back(r.snr_db);
    }
  }
  std::ofstream out = detail::open_out(path);
  out << "snr_db,metric";
  for (Scheme s : schemes) out << ',' << scheme_name(s);
  out << ",trials_ok,trials_failed\n";
  for (double snr : snrs) {
    for (const char* metric : {"all", "target"}) {
      out << detail::num(snr) << ',' << metric;
      int ok = 0, failed = 0;
      for (Scheme s : schemes) {
        const NmseRow& r = table.at(snr, s);
        ok = std::max(ok, r.trials_ok);
        failed = std::max(failed, r.trials_failed);
        out << ','
            << detail::num(metric == std::string("all") ? r.nmse_all_mean
                                                        : r.nmse_target_mean);
      }
      out << ',' << ok << ',' << failed << '\n';
    }
  }
  detail::check_write(out, path);
}

}  // namespace dsr
