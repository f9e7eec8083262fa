#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dsr/common.hpp"
#include "dsr/grid.hpp"
#include "dsr/scene.hpp"
#include "dsr/signal.hpp"

namespace dsr {

// Abstract sensing operator. Implementations may be dense or matrix-free;
// column regeneration is deterministic, so column(j) called twice returns
// bit-identical vectors and apply/adjoint see exactly the column(j) samples.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;
  virtual void column_into(Eigen::Index j, CVec& out) const = 0;

  CVec column(Eigen::Index j) const {
    CVec c;
    column_into(j, c);
    return c;
  }

  // H x
  virtual CVec apply(const CVec& x) const {
    if (x.size() != cols()) {
      throw std::invalid_argument("LinearOperator::apply: size mismatch");
    }
    CVec out = CVec::Zero(rows());
    CVec col;
    for (Eigen::Index j = 0; j < cols(); ++j) {
      if (x[j] == cplx(0.0, 0.0)) continue;
      column_into(j, col);
      out += x[j] * col;
    }
    return out;
  }

  // H^H y
  virtual CVec adjoint(const CVec& y) const {
    if (y.size() != rows()) {
      throw std::invalid_argument("LinearOperator::adjoint: size mismatch");
    }
    CVec out(cols());
    CVec col;
    for (Eigen::Index j = 0; j < cols(); ++j) {
      column_into(j, col);
      out[j] = col.dot(y);
    }
    return out;
  }

  virtual RVec column_norms() const {
    RVec n(cols());
    CVec col;
    for (Eigen::Index j = 0; j < cols(); ++j) {
      column_into(j, col);
      n[j] = col.norm();
    }
    return n;
  }

  // Dense matrix of all columns; refuses beyond the byte budget so that
  // matrix-free paths stay mandatory for large grids.
  CMat materialize(std::size_t budget_bytes = std::size_t(1) << 28) const {
    const std::size_t bytes = static_cast<std::size_t>(rows()) *
                              static_cast<std::size_t>(cols()) * sizeof(cplx);
    if (bytes > budget_bytes) {
      throw MemoryBudgetError(
          "materialize: " + std::to_string(rows()) + " x " +
          std::to_string(cols()) + " needs " + std::to_string(bytes) +
          " bytes, budget " + std::to_string(budget_bytes));
    }
    CMat h(rows(), cols());
    CVec col;
    for (Eigen::Index j = 0; j < cols(); ++j) {
      column_into(j, col);
      h.col(j) = col;
    }
    return h;
  }
};

// Plain dense operator (small problems, tests).
class DenseOperator : public LinearOperator {
 public:
  explicit DenseOperator(CMat m) : m_(std::move(m)) {}
  Eigen::Index rows() const override { return m_.rows(); }
  Eigen::Index cols() const override { return m_.cols(); }
  void column_into(Eigen::Index j, CVec& out) const override {
    out = m_.col(j);
  }
  CVec apply(const CVec& x) const override { return m_ * x; }
  CVec adjoint(const CVec& y) const override { return m_.adjoint() * y; }
  RVec column_norms() const override {
    return m_.colwise().norm().transpose();
  }
  const CMat& matrix() const { return m_; }

 private:
  CMat m_;
};

namespace detail {

// Steering samples of sensor q at p written through a fast-time phasor
// recurrence (one trig pair per chirp instead of per sample); `scale`
// multiplies every sample. Phase model identical to steering_phase().
inline void sensor_steering_into(const Scene& scene, int q, const Vec3& p,
                                 cplx scale, cplx* out) {
  const RadarUnit& r = scene.radars.at(q);
  const int M = r.n_rx(), N = r.n_tx(), K = r.n_chirps,
            Ns = r.fast_time_samples();
  const double v = direction_and_doppler(scene, q, p).speed;
  const double fc_c = r.carrier_hz / kSpeedOfLight;
  const double doppler_hz = 2.0 * r.carrier_hz * v / kSpeedOfLight;
  const double ts = r.sample_period_s();
  Eigen::Index idx = 0;
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      const double g = bistatic_range(scene, q, m, n, p);
      const double beat_hz = r.modulation_rate() * g / kSpeedOfLight;
      const cplx step = std::polar(1.0, -kTwoPi * (doppler_hz + beat_hz) * ts);
      for (int k = 0; k < K; ++k) {
        const int slot = n + k * N;
        cplx ph = scale * std::polar(1.0, -kTwoPi * (fc_c * g +
                                                     doppler_hz * r.pri_s * slot));
        for (int ns = 0; ns < Ns; ++ns) {
          out[idx++] = ph;
          ph *= step;
        }
      }
    }
  }
}

}  // namespace detail

// Non-coherent block dictionary: L cells x Q sensors, cell-major columns
// (column l*Q + q holds the sensor-q steering block of cell l, zero
// elsewhere). Per-sensor reflectivities and sync phases are absorbed by the
// recovered coefficients, so columns carry no c_q factor.
class BlockDictionary : public LinearOperator {
 public:
  BlockDictionary(Scene scene, ImagingGrid grid)
      : scene_(std::move(scene)), grid_(grid), dims_(cube_dims(scene_)) {
    scene_.validate();
  }

  Eigen::Index rows() const override {
    return static_cast<Eigen::Index>(dims_.total());
  }
  Eigen::Index cols() const override {
    return static_cast<Eigen::Index>(grid_.size()) * dims_.q;
  }
  int n_cells() const { return grid_.size(); }
  int n_sensors() const { return dims_.q; }
  const ImagingGrid& grid() const { return grid_; }
  const Scene& scene() const { return scene_; }

  Eigen::Index block_begin(int cell) const {
    return static_cast<Eigen::Index>(cell) * dims_.q;
  }
  int cell_of(Eigen::Index j) const { return static_cast<int>(j / dims_.q); }
  int sensor_of(Eigen::Index j) const { return static_cast<int>(j % dims_.q); }

  void column_into(Eigen::Index j, CVec& out) const override {
    out = CVec::Zero(rows());
    const int q = sensor_of(j);
    detail::sensor_steering_into(scene_, q,
                                 grid_.cell_position(cell_of(j)),
                                 cplx(1.0, 0.0), out.data() + seg_begin(q));
  }

  CVec apply(const CVec& x) const override {
    if (x.size() != cols()) {
      throw std::invalid_argument("BlockDictionary::apply: size mismatch");
    }
    CVec out = CVec::Zero(rows());
    CVec seg(seg_len());
    for (Eigen::Index j = 0; j < cols(); ++j) {
      if (x[j] == cplx(0.0, 0.0)) continue;
      const int q = sensor_of(j);
      detail::sensor_steering_into(scene_, q,
                                   grid_.cell_position(cell_of(j)),
                                   cplx(1.0, 0.0), seg.data());
      out.segment(seg_begin(q), seg_len()) += x[j] * seg;
    }
    return out;
  }

  CVec adjoint(const CVec& y) const override {
    if (y.size() != rows()) {
      throw std::invalid_argument("BlockDictionary::adjoint: size mismatch");
    }
    CVec out(cols());
    CVec seg(seg_len());
    for (Eigen::Index j = 0; j < cols(); ++j) {
      const int q = sensor_of(j);
      detail::sensor_steering_into(scene_, q,
                                   grid_.cell_position(cell_of(j)),
                                   cplx(1.0, 0.0), seg.data());
      out[j] = seg.dot(y.segment(seg_begin(q), seg_len()));
    }
    return out;
  }

  // Unit-modulus entries: every column has norm sqrt(samples per sensor).
  RVec column_norms() const override {
    return RVec::Constant(cols(), std::sqrt(static_cast<double>(seg_len())));
  }

 private:
  Eigen::Index seg_len() const {
    return static_cast<Eigen::Index>(dims_.per_sensor());
  }
  Eigen::Index seg_begin(int q) const { return seg_len() * q; }

  Scene scene_;
  ImagingGrid grid_;
  CubeDims dims_;
};

// Coherent dictionary: one column per cell, the stacked steering vector with
// the estimated per-sensor sync phases applied so that a perfectly estimated
// offset makes the true-cell column collinear with the data.
class CoherentDictionary : public LinearOperator {
 public:
  CoherentDictionary(Scene scene, ImagingGrid grid,
                     std::vector<double> offsets_s)
      : scene_(std::move(scene)),
        grid_(grid),
        dims_(cube_dims(scene_)),
        offsets_s_(std::move(offsets_s)) {
    scene_.validate();
    if (static_cast<int>(offsets_s_.size()) != dims_.q) {
      throw std::invalid_argument(
          "CoherentDictionary: need one sync estimate per sensor");
    }
  }

  Eigen::Index rows() const override {
    return static_cast<Eigen::Index>(dims_.total());
  }
  Eigen::Index cols() const override {
    return static_cast<Eigen::Index>(grid_.size());
  }
  int n_cells() const { return grid_.size(); }
  int n_sensors() const { return dims_.q; }
  const ImagingGrid& grid() const { return grid_; }
  const std::vector<double>& offsets_s() const { return offsets_s_; }

  void column_into(Eigen::Index j, CVec& out) const override {
    out.resize(rows());
    const Vec3 p = grid_.cell_position(static_cast<int>(j));
    const Eigen::Index seg = static_cast<Eigen::Index>(dims_.per_sensor());
    for (int q = 0; q < dims_.q; ++q) {
      const cplx cq = sync_phase(scene_.radars[q],
                                 direction_and_doppler(scene_, q, p).speed,
                                 offsets_s_[q]);
      detail::sensor_steering_into(scene_, q, p, cq, out.data() + seg * q);
    }
  }

  RVec column_norms() const override {
    return RVec::Constant(cols(),
                          std::sqrt(static_cast<double>(dims_.total())));
  }

 private:
  Scene scene_;
  ImagingGrid grid_;
  CubeDims dims_;
  std::vector<double> offsets_s_;
};

inline BlockDictionary build_block_dictionary(const Scene& scene,
                                              const ImagingGrid& grid) {
  return BlockDictionary(scene, grid);
}

inline CoherentDictionary build_coherent_dictionary(
    const Scene& scene, const ImagingGrid& grid,
    std::vector<double> sync_estimates) {
  return CoherentDictionary(scene, grid, std::move(sync_estimates));
}

// ---------------------------------------------------------------------------
// Compression.

enum class CompressorKind { gaussian, subsample };

// Measurement matrix G (P x full stacked length). Gaussian entries are
// CN(0, 1/P) so G preserves signal energy in expectation; subsample rows are
// distinct canonical selectors.
struct Compressor {
  CompressorKind kind = CompressorKind::gaussian;
  Eigen::Index in_rows = 0;
  CMat matrix;                     // gaussian only
  std::vector<Eigen::Index> keep;  // subsample only, sorted

  Eigen::Index out_rows() const {
    return kind == CompressorKind::gaussian
               ? matrix.rows()
               : static_cast<Eigen::Index>(keep.size());
  }

  static Compressor make_gaussian(Eigen::Index p, Eigen::Index r,
                                  std::uint64_t seed) {
    if (p < 1 || p > r) {
      throw std::invalid_argument("Compressor: need 1 <= P <= rows");
    }
    Compressor c;
    c.kind = CompressorKind::gaussian;
    c.in_rows = r;
    c.matrix = CMat(p, r);
    StreamRng rng(seed, 0xC0117u, 0);
    const double var = 1.0 / static_cast<double>(p);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < r; ++j) c.matrix(i, j) = rng.cnormal(var);
    }
    return c;
  }

  static Compressor make_subsample(Eigen::Index p, Eigen::Index r,
                                   std::uint64_t seed) {
    if (p < 1 || p > r) {
      throw std::invalid_argument("Compressor: need 1 <= P <= rows");
    }
    Compressor c;
    c.kind = CompressorKind::subsample;
    c.in_rows = r;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(r));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    StreamRng rng(seed, 0x5E1ECu, 0);
    for (Eigen::Index i = 0; i < p; ++i) {
      const Eigen::Index j =
          i + static_cast<Eigen::Index>(rng.next_u64() %
                                        static_cast<std::uint64_t>(r - i));
      std::swap(idx[i], idx[j]);
    }
    c.keep.assign(idx.begin(), idx.begin() + p);
    std::sort(c.keep.begin(), c.keep.end());
    return c;
  }
};

inline CVec compress(const CVec& v, const Compressor& c) {
  if (v.size() != c.in_rows) {
    throw std::invalid_argument("compress: length mismatch");
  }
  if (c.kind == CompressorKind::gaussian) return c.matrix * v;
  CVec out(c.out_rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = v[c.keep[i]];
  return out;
}

// G^H y (scatter for subsample).
inline CVec compress_adjoint(const CVec& y, const Compressor& c) {
  if (y.size() != c.out_rows()) {
    throw std::invalid_argument("compress_adjoint: length mismatch");
  }
  if (c.kind == CompressorKind::gaussian) return c.matrix.adjoint() * y;
  CVec out = CVec::Zero(c.in_rows);
  for (Eigen::Index i = 0; i < y.size(); ++i) out[c.keep[i]] = y[i];
  return out;
}

// View of G * base with columns compressed on demand. The base operator must
// outlive the view.
class CompressedOperator : public LinearOperator {
 public:
  CompressedOperator(const LinearOperator& base, Compressor comp)
      : base_(base), comp_(std::move(comp)) {
    if (comp_.in_rows != base_.rows()) {
      throw std::invalid_argument("CompressedOperator: row mismatch");
    }
  }

  Eigen::Index rows() const override { return comp_.out_rows(); }
  Eigen::Index cols() const override { return base_.cols(); }
  void column_into(Eigen::Index j, CVec& out) const override {
    out = compress(base_.column(j), comp_);
  }
  CVec apply(const CVec& x) const override {
    return compress(base_.apply(x), comp_);
  }
  CVec adjoint(const CVec& y) const override {
    return base_.adjoint(compress_adjoint(y, comp_));
  }

 private:
  const LinearOperator& base_;
  Compressor comp_;
};

// ---------------------------------------------------------------------------
// Point target response functions.

enum class PtrfMode { single, noncoherent, coherent };

// Raw matched-filter response magnitudes of a unit point target at p0,
// evaluated at arbitrary probe points:
//   single:       |alpha_1|^2 |h_1(p)^H h_1(p0)|           (sensor 1 only)
//   noncoherent:  sum_q |alpha_q|^2 |h_q(p)^H h_q(p0)|
//   coherent:     |sum_q conj(c_q(p)) c_q(p0) h_q(p)^H h_q(p0)|
// with the scene's own sync offsets applied on both sides in coherent mode.
inline RVec ptrf_values(const Scene& scene, const std::vector<Vec3>& points,
                        const Vec3& p0, PtrfMode mode,
                        const std::vector<cplx>& alphas = {}) {
  scene.validate();
  const CubeDims dims = cube_dims(scene);
  const int Q = dims.q;
  if (!alphas.empty() && static_cast<int>(alphas.size()) != Q) {
    throw std::invalid_argument("ptrf_values: need one alpha per sensor");
  }
  const Eigen::Index seg = static_cast<Eigen::Index>(dims.per_sensor());
  std::vector<CVec> data(Q, CVec(seg));
  std::vector<cplx> c0(Q);
  for (int q = 0; q < Q; ++q) {
    detail::sensor_steering_into(scene, q, p0, cplx(1.0, 0.0),
                                 data[q].data());
    c0[q] = sync_phase(scene.radars[q],
                       direction_and_doppler(scene, q, p0).speed,
                       scene.radars[q].sync_offset_s);
  }
  const auto weight = [&](int q) {
    return alphas.empty() ? 1.0 : std::norm(alphas[q]);
  };

  RVec out(static_cast<Eigen::Index>(points.size()));
  CVec probe(seg);
  const int q_used = (mode == PtrfMode::single) ? 1 : Q;
  for (std::size_t i = 0; i < points.size(); ++i) {
    cplx coh(0.0, 0.0);
    double mag = 0.0;
    for (int q = 0; q < q_used; ++q) {
      detail::sensor_steering_into(scene, q, points[i], cplx(1.0, 0.0),
                                   probe.data());
      const cplx corr = probe.dot(data[q]);
      if (mode == PtrfMode::coherent) {
        const cplx cq = sync_phase(
            scene.radars[q], direction_and_doppler(scene, q, points[i]).speed,
            scene.radars[q].sync_offset_s);
        coh += std::conj(cq) * c0[q] * corr;
      } else {
        mag += weight(q) * std::abs(corr);
      }
    }
    out[i] = (mode == PtrfMode::coherent) ? std::abs(coh) : mag;
  }
  return out;
}

// Normalized (peak = 1) response over the imaging grid, row iy / column ix.
inline RMat ptrf(const Scene& scene, const ImagingGrid& grid, const Vec3& p0,
                 PtrfMode mode, const std::vector<cplx>& alphas = {}) {
  std::vector<Vec3> pts(static_cast<std::size_t>(grid.size()));
  for (int l = 0; l < grid.size(); ++l) pts[l] = grid.cell_position(l);
  const RVec vals = ptrf_values(scene, pts, p0, mode, alphas);
  const double peak = vals.maxCoeff();
  if (!(peak > 0.0)) {
    throw std::invalid_argument("ptrf: response is identically zero");
  }
  RMat out(grid.ny, grid.nx);
  for (int l = 0; l < grid.size(); ++l) {
    out(l / grid.nx, l % grid.nx) = vals[l] / peak;
  }
  return out;
}

// Half-power (-3 dB) width of a 1-D response cut: linearly interpolated
// crossings of peak/sqrt(2) on each side of the global peak. coords must be
// increasing; returns NaN when either side never crosses inside the cut.
inline double half_power_width(const RVec& coords, const RVec& values) {
  if (coords.size() != values.size() || coords.size() < 2) {
    throw std::invalid_argument("half_power_width: need matching cut arrays");
  }
  Eigen::Index imax = 0;
  const double vmax = values.maxCoeff(&imax);
  const double level = vmax / std::sqrt(2.0);
  const auto cross = [&](Eigen::Index a, Eigen::Index b) {
    const double t = (level - values[a]) / (values[b] - values[a]);
    return coords[a] + t * (coords[b] - coords[a]);
  };
  double left = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = imax; i > 0; --i) {
    if (values[i - 1] < level && values[i] >= level) {
      left = cross(i - 1, i);
      break;
    }
  }
  double right = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = imax; i + 1 < values.size(); ++i) {
    if (values[i + 1] < level && values[i] >= level) {
      right = cross(i + 1, i);
      break;
    }
  }
  return right - left;
}

}  // namespace dsr
