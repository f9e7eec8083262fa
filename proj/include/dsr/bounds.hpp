#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "dsr/common.hpp"
#include "dsr/grid.hpp"
#include "dsr/scene.hpp"
#include "dsr/signal.hpp"

namespace dsr {

// Gaussian prior on target position used by the Bayesian bounds.
struct PriorSpec {
  Vec3 mean = Vec3::Zero();
  Eigen::Matrix3d covariance = 0.01 * Eigen::Matrix3d::Identity();
  int n_mc = 20;  // Monte-Carlo draws for the prior expectation
};

// Noise description shared by the bound evaluators. Point-cloud sigmas build
// a diagonal R_n; a non-finite sigma drops that measurement. When
// pcf_derived_from_raw is set, the per-sensor point-cloud covariance is
// instead derived from the raw-data bound at the evaluation point and
// inflated by pcf_inflation (estimator losses).
struct MeasurementNoise {
  double range_sigma_m = 0.06;
  double azimuth_sigma_rad = 0.02 * kPi / 180.0;
  double elevation_sigma_rad = 0.02 * kPi / 180.0;
  double raw_variance = 1.0;  // complex noise variance per raw sample
  bool pcf_derived_from_raw = false;
  double pcf_inflation = 1.0;
};

enum class BoundKind { crlb, bcrlb };

struct BoundOptions {
  BoundKind kind = BoundKind::bcrlb;
  std::uint64_t seed = 1;
  // Coherent local FIM position block: scaled by the reflectivity prior
  // variance as published (default), or by |alpha|^2 when set.
  bool coherent_alpha_power = false;
  double signal_variance = -1.0;  // < 0: use |alpha|^2
};

struct FimResult {
  RMat fim;    // position-block information (nuisance already eliminated)
  RMat bound;  // inverse of fim
  double avg_position_bound = 0.0;  // mean of the x and y bound diagonals
};

// ---------------------------------------------------------------------------
// Point-cloud fusion model.

// Stacked Jacobian of the per-sensor (range, azimuth, elevation) measurements
// with respect to target position: rows [dr_q; daz_q; del_q] for each sensor,
// columns (x, y, z).
inline RMat pcf_jacobian(const Scene& scene, const Vec3& p) {
  const int Q = scene.n_radars();
  RMat j(3 * Q, 3);
  for (int q = 0; q < Q; ++q) {
    const Vec3 d = p - scene.radars[q].origin;
    const double r = d.norm();
    const double rho2 = d.x() * d.x() + d.y() * d.y();
    const double rho = std::sqrt(rho2);
    if (r == 0.0 || rho == 0.0) {
      throw DegenerateGeometryError(
          "pcf_jacobian: azimuth/elevation undefined at sensor " +
          std::to_string(q));
    }
    j.row(3 * q + 0) = (d / r).transpose();
    j.row(3 * q + 1) << -d.y() / rho2, d.x() / rho2, 0.0;
    const double r2 = rho2 + d.z() * d.z();
    j.row(3 * q + 2) << -d.x() * d.z() / (rho * r2), -d.y() * d.z() / (rho * r2),
        rho / r2;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Raw-signal steering derivatives (static scenes).

struct SensorSteering {
  CVec h, ux, uy, uz;
};

namespace detail {

inline void require_static(const Scene& scene, const char* who) {
  if (scene.ego_velocity.norm() != 0.0) {
    throw std::invalid_argument(std::string(who) +
                                ": requires a static scene (zero velocity)");
  }
}

// Per-sensor steering vector and its position gradients for a static scene.
// Each gradient sample is h * (-j) * 2 pi (f_c / c + B_r t_ns / c) * dg/dx.
inline SensorSteering sensor_steering(const Scene& scene, int q,
                                      const Vec3& p) {
  const RadarUnit& r = scene.radars.at(q);
  const int M = r.n_rx(), N = r.n_tx(), K = r.n_chirps,
            Ns = r.fast_time_samples();
  const Eigen::Index size = static_cast<Eigen::Index>(M) * N * K * Ns;
  SensorSteering s{CVec(size), CVec(size), CVec(size), CVec(size)};
  const double fc_c = r.carrier_hz / kSpeedOfLight;
  const double br_c = r.modulation_rate() / kSpeedOfLight;
  const double ts = r.sample_period_s();
  Eigen::Index idx = 0;
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      const Vec3 tpos = r.tx_position(n);
      const Vec3 rpos = r.rx_position(m);
      const double dt = (p - tpos).norm();
      const double dr = (p - rpos).norm();
      if (dt == 0.0 || dr == 0.0) {
        throw DegenerateGeometryError(
            "sensor_steering: target on a phase center");
      }
      const double g = dt + dr;
      const Vec3 dg = (p - tpos) / dt + (p - rpos) / dr;
      for (int k = 0; k < K; ++k) {
        for (int ns = 0; ns < Ns; ++ns) {
          const double phase =
              -kTwoPi * (fc_c * g + br_c * g * ts * ns);
          const cplx h = std::polar(1.0, phase);
          const cplx jw = cplx(0.0, -kTwoPi * (fc_c + br_c * ts * ns));
          s.h[idx] = h;
          s.ux[idx] = h * jw * dg.x();
          s.uy[idx] = h * jw * dg.y();
          s.uz[idx] = h * jw * dg.z();
          ++idx;
        }
      }
    }
  }
  return s;
}

}  // namespace detail

struct SteeringGradient {
  CVec ux, uy, uz;
};

// Stacked position gradients of the steering vector for a static scene.
inline SteeringGradient steering_gradient(const Scene& scene, const Vec3& p) {
  detail::require_static(scene, "steering_gradient");
  const CubeDims d = cube_dims(scene);
  SteeringGradient g{CVec(static_cast<Eigen::Index>(d.total())),
                     CVec(static_cast<Eigen::Index>(d.total())),
                     CVec(static_cast<Eigen::Index>(d.total()))};
  for (int q = 0; q < d.q; ++q) {
    const SensorSteering s = detail::sensor_steering(scene, q, p);
    const Eigen::Index off = static_cast<Eigen::Index>(d.per_sensor()) * q;
    g.ux.segment(off, s.ux.size()) = s.ux;
    g.uy.segment(off, s.uy.size()) = s.uy;
    g.uz.segment(off, s.uz.size()) = s.uz;
  }
  return g;
}

namespace detail {

// Columns of the position block actually estimated: x, y and optionally z.
inline int position_dims(const Scene& scene, const Vec3& p) {
  return (scene.is_planar() && p.z() == 0.0) ? 2 : 3;
}

// Local FIM of the non-coherent raw model for one sensor, parameters
// (pos..., Re alpha_q, Im alpha_q). Used for both the NCP stacking and the
// derived point-cloud covariance.
inline RMat sensor_raw_fim(const Scene& scene, int q, const Vec3& p,
                           const cplx& alpha, double raw_variance,
                           int pos_dims) {
  const SensorSteering s = sensor_steering(scene, q, p);
  const double inv_var = 2.0 / raw_variance;
  const double pw = std::norm(alpha);
  const CVec* u[3] = {&s.ux, &s.uy, &s.uz};
  RMat f = RMat::Zero(pos_dims + 2, pos_dims + 2);
  for (int a = 0; a < pos_dims; ++a) {
    for (int b = a; b < pos_dims; ++b) {
      f(a, b) = f(b, a) = inv_var * pw * u[a]->dot(*u[b]).real();
    }
    const cplx c = std::conj(alpha) * u[a]->dot(s.h);
    f(a, pos_dims) = f(pos_dims, a) = inv_var * c.real();
    f(a, pos_dims + 1) = f(pos_dims + 1, a) = -inv_var * c.imag();
  }
  const double s_q = static_cast<double>(s.h.size());
  f(pos_dims, pos_dims) = inv_var * s_q;
  f(pos_dims + 1, pos_dims + 1) = inv_var * s_q;
  return f;
}

// Schur complement onto the leading pos_dims block.
inline RMat schur_position(const RMat& f, int pos_dims) {
  const int nuis = static_cast<int>(f.rows()) - pos_dims;
  if (nuis == 0) return f;
  const RMat a = f.topLeftCorner(pos_dims, pos_dims);
  const RMat b = f.topRightCorner(pos_dims, nuis);
  const RMat d = f.bottomRightCorner(nuis, nuis);
  return a - b * invert_spd(d) * b.transpose();
}

// Draws a position from the prior restricted to the estimated dimensions.
inline Vec3 draw_prior(const PriorSpec& prior, int pos_dims, StreamRng& rng) {
  const RMat cov = prior.covariance.topLeftCorner(pos_dims, pos_dims);
  Eigen::LLT<RMat> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("prior covariance is not positive definite");
  }
  RVec z(pos_dims);
  for (int i = 0; i < pos_dims; ++i) z[i] = rng.normal();
  const RVec step = llt.matrixL() * z;
  Vec3 p = prior.mean;
  for (int i = 0; i < pos_dims; ++i) p[i] += step[i];
  return p;
}

inline FimResult finish_bound(RMat fim) {
  FimResult out;
  out.bound = invert_spd(fim);
  out.fim = std::move(fim);
  out.avg_position_bound = 0.5 * (out.bound(0, 0) + out.bound(1, 1));
  return out;
}

// Shared prior-expectation driver: accumulates local FIMs over draws, adds
// the prior information on the position block, then Schur-eliminates the
// trailing nuisance block. Draws are antithetic pairs (mean +/- step) so the
// prior expectation has no first-order sampling error; an odd n_mc leaves the
// last draw unpaired.
template <typename LocalFim>
FimResult bayesian_bound(const PriorSpec& prior, const BoundOptions& opts,
                         int pos_dims, int nuisance, LocalFim&& local) {
  const int dim = pos_dims + nuisance;
  RMat f_sum = RMat::Zero(dim, dim);
  if (opts.kind == BoundKind::crlb) {
    f_sum = local(prior.mean);
  } else {
    if (prior.n_mc < 1) {
      throw std::invalid_argument("PriorSpec: n_mc must be >= 1");
    }
    for (int i = 0; i < prior.n_mc; ++i) {
      StreamRng rng(opts.seed, 0x9E37u, static_cast<std::uint64_t>(i / 2));
      Vec3 p = draw_prior(prior, pos_dims, rng);
      if (i % 2 == 1) p = 2.0 * prior.mean - p;
      f_sum += local(p);
    }
    f_sum /= static_cast<double>(prior.n_mc);
    f_sum.topLeftCorner(pos_dims, pos_dims) +=
        invert_spd(prior.covariance.topLeftCorner(pos_dims, pos_dims));
  }
  return finish_bound(schur_position(f_sum, pos_dims));
}

}  // namespace detail

// Per-sensor point-cloud covariance derived from the raw-data bound at p
// (position information mapped through the measurement Jacobian), inflated by
// noise.pcf_inflation.
inline RMat derived_pcf_covariance(const Scene& scene, int q, const Vec3& p,
                                   const MeasurementNoise& noise,
                                   const cplx& alpha) {
  detail::require_static(scene, "derived_pcf_covariance");
  const int pos_dims = detail::position_dims(scene, p);
  const RMat f_pos = detail::schur_position(
      detail::sensor_raw_fim(scene, q, p, alpha, noise.raw_variance, pos_dims),
      pos_dims);
  const RMat j_full = pcf_jacobian(scene.single_sensor(q), p);
  RMat j(pos_dims, pos_dims);
  j.row(0) = j_full.row(0).head(pos_dims);
  j.row(1) = j_full.row(1).head(pos_dims);
  if (pos_dims == 3) j.row(2) = j_full.row(2).head(3);
  return noise.pcf_inflation * j * invert_spd(f_pos) * j.transpose();
}

// Bayesian (or deterministic) position bound for point-cloud fusion.
// alphas are only consulted in the derived-noise mode.
inline FimResult pcf_bcrlb(const Scene& scene, const MeasurementNoise& noise,
                           const PriorSpec& prior,
                           const BoundOptions& opts = {},
                           const std::vector<cplx>& alphas = {}) {
  scene.validate();
  const int Q = scene.n_radars();
  const int pos_dims = detail::position_dims(scene, prior.mean);
  const auto alpha_of = [&](int q) {
    return alphas.empty() ? cplx(1.0, 0.0)
                          : alphas.at(alphas.size() == 1 ? 0 : q);
  };

  if (noise.pcf_derived_from_raw) {
    detail::require_static(scene, "pcf_bcrlb(derived noise)");
    if (!(noise.pcf_inflation >= 1.0)) {
      throw std::invalid_argument("pcf_inflation must be >= 1");
    }
  }
  const auto local = [&](const Vec3& p) -> RMat {
    RMat f = RMat::Zero(pos_dims, pos_dims);
    if (noise.pcf_derived_from_raw) {
      for (int q = 0; q < Q; ++q) {
        f += detail::schur_position(
                 detail::sensor_raw_fim(scene, q, p, alpha_of(q),
                                        noise.raw_variance, pos_dims),
                 pos_dims) /
             noise.pcf_inflation;
      }
      return f;
    }
    const RMat j = pcf_jacobian(scene, p);
    const double sig[3] = {noise.range_sigma_m, noise.azimuth_sigma_rad,
                           noise.elevation_sigma_rad};
    bool any = false;
    for (int q = 0; q < Q; ++q) {
      for (int rix = 0; rix < 3; ++rix) {
        if (rix == 2 && pos_dims == 2) continue;  // planar: elevation dropped
        if (!std::isfinite(sig[rix]) || !(sig[rix] > 0)) continue;
        any = true;
        const RVec row = j.row(3 * q + rix).head(pos_dims);
        f += row * row.transpose() / (sig[rix] * sig[rix]);
      }
    }
    if (!any) {
      throw std::invalid_argument("pcf_bcrlb: no usable measurement rows");
    }
    return f;
  };
  return detail::bayesian_bound(prior, opts, pos_dims, 0, local);
}

// Full local FIM of the non-coherent model (position + per-sensor
// reflectivities), exposed for direct verification against the likelihood.
inline RMat ncp_fim_local(const Scene& scene, const MeasurementNoise& noise,
                          const Vec3& p, const std::vector<cplx>& alphas) {
  detail::require_static(scene, "ncp_fim_local");
  const int Q = scene.n_radars();
  const int pos_dims = detail::position_dims(scene, p);
  RMat f = RMat::Zero(pos_dims + 2 * Q, pos_dims + 2 * Q);
  for (int q = 0; q < Q; ++q) {
    const RMat fq = detail::sensor_raw_fim(scene, q, p, alphas.at(q),
                                           noise.raw_variance, pos_dims);
    f.topLeftCorner(pos_dims, pos_dims) += fq.topLeftCorner(pos_dims, pos_dims);
    const int col = pos_dims + 2 * q;
    f.block(0, col, pos_dims, 2) = fq.topRightCorner(pos_dims, 2);
    f.block(col, 0, 2, pos_dims) = fq.bottomLeftCorner(2, pos_dims);
    f.block(col, col, 2, 2) = fq.bottomRightCorner(2, 2);
  }
  return f;
}

// Bayesian position bound for non-coherent raw-signal processing. alphas are
// the per-sensor complex reflectivities of the (single) target.
inline FimResult ncp_bcrlb(const Scene& scene, const MeasurementNoise& noise,
                           const PriorSpec& prior,
                           const std::vector<cplx>& alphas,
                           const BoundOptions& opts = {}) {
  scene.validate();
  detail::require_static(scene, "ncp_bcrlb");
  const int Q = scene.n_radars();
  if (static_cast<int>(alphas.size()) != Q) {
    throw std::invalid_argument("ncp_bcrlb: need one alpha per sensor");
  }
  const int pos_dims = detail::position_dims(scene, prior.mean);
  const auto local = [&](const Vec3& p) -> RMat {
    return ncp_fim_local(scene, noise, p, alphas);
  };
  return detail::bayesian_bound(prior, opts, pos_dims, 2 * Q, local);
}

// Full local FIM of the coherent model (position + one shared reflectivity).
inline RMat cp_fim_local(const Scene& scene, const MeasurementNoise& noise,
                         const Vec3& p, cplx alpha,
                         const BoundOptions& opts = {}) {
  detail::require_static(scene, "cp_fim_local");
  const int Q = scene.n_radars();
  const int pos_dims = detail::position_dims(scene, p);
  const double inv_var = 2.0 / noise.raw_variance;
  const double weight = opts.coherent_alpha_power
                            ? std::norm(alpha)
                            : (opts.signal_variance >= 0 ? opts.signal_variance
                                                         : std::norm(alpha));
  RMat f = RMat::Zero(pos_dims + 2, pos_dims + 2);
  double total = 0.0;
  std::vector<SensorSteering> ss;
  ss.reserve(Q);
  for (int q = 0; q < Q; ++q) ss.push_back(detail::sensor_steering(scene, q, p));
  for (int q = 0; q < Q; ++q) {
    const CVec* u[3] = {&ss[q].ux, &ss[q].uy, &ss[q].uz};
    for (int a = 0; a < pos_dims; ++a) {
      for (int b = a; b < pos_dims; ++b) {
        const double v = inv_var * weight * u[a]->dot(*u[b]).real();
        f(a, b) += v;
        if (b != a) f(b, a) += v;
      }
      const cplx c = std::conj(alpha) * u[a]->dot(ss[q].h);
      f(a, pos_dims) += inv_var * c.real();
      f(pos_dims, a) += inv_var * c.real();
      f(a, pos_dims + 1) += -inv_var * c.imag();
      f(pos_dims + 1, a) += -inv_var * c.imag();
    }
    total += static_cast<double>(ss[q].h.size());
  }
  f(pos_dims, pos_dims) = inv_var * total;
  f(pos_dims + 1, pos_dims + 1) = inv_var * total;
  return f;
}

// Bayesian position bound for coherent raw-signal processing.
inline FimResult cp_bcrlb(const Scene& scene, const MeasurementNoise& noise,
                          const PriorSpec& prior, cplx alpha,
                          const BoundOptions& opts = {}) {
  scene.validate();
  detail::require_static(scene, "cp_bcrlb");
  const int pos_dims = detail::position_dims(scene, prior.mean);
  const auto local = [&](const Vec3& p) -> RMat {
    return cp_fim_local(scene, noise, p, alpha, opts);
  };
  return detail::bayesian_bound(prior, opts, pos_dims, 2, local);
}

// ---------------------------------------------------------------------------
// Bound maps over an imaging grid.

enum class BoundMode { pcf, ncp, cp };

struct ContourSpec {
  BoundMode mode = BoundMode::ncp;
  BoundOptions options;
  Eigen::Matrix3d prior_covariance = 0.01 * Eigen::Matrix3d::Identity();
  int n_mc = 20;
  std::vector<cplx> alphas;  // per sensor; empty = all ones
  int threads = 1;
};

// Average position bound per grid cell (ny x nx). Cells whose geometry or
// conditioning fails hold NaN instead of aborting the sweep.
inline RMat bound_contour(const Scene& scene, const MeasurementNoise& noise,
                          const ImagingGrid& grid, const ContourSpec& spec) {
  scene.validate();
  const int Q = scene.n_radars();
  std::vector<cplx> alphas = spec.alphas;
  if (alphas.empty()) alphas.assign(Q, cplx(1.0, 0.0));
  RMat out(grid.ny, grid.nx);
  parallel_for(static_cast<std::size_t>(grid.size()), spec.threads,
               [&](std::size_t l) {
    PriorSpec prior;
    prior.mean = grid.cell_position(static_cast<int>(l));
    prior.covariance = spec.prior_covariance;
    prior.n_mc = spec.n_mc;
    BoundOptions opts = spec.options;
    opts.seed = spec.options.seed ^ (0x1000003u * (l + 1));
    double value = std::numeric_limits<double>::quiet_NaN();
    try {
      FimResult r;
      switch (spec.mode) {
        case BoundMode::pcf:
          r = pcf_bcrlb(scene, noise, prior, opts, alphas);
          break;
        case BoundMode::ncp:
          r = ncp_bcrlb(scene, noise, prior, alphas, opts);
          break;
        case BoundMode::cp:
          r = cp_bcrlb(scene, noise, prior, alphas.front(), opts);
          break;
      }
      value = r.avg_position_bound;
    } catch (const DegenerateGeometryError&) {
    } catch (const ConditioningError&) {
    }
    out(static_cast<int>(l) / grid.nx, static_cast<int>(l) % grid.nx) = value;
  });
  return out;
}

}  // namespace dsr
