#include <catch2/catch_amalgamated.hpp>

#include "dsr/bounds.hpp"
#include "test_helpers.hpp"

using namespace dsr;
using dsrtest::point_radar;
using dsrtest::ula_radar;

namespace {

// Independent closed-form measurement functions used as the FD oracle.
double meas_range(const Vec3& o, const Vec3& p) { return (p - o).norm(); }
double meas_az(const Vec3& o, const Vec3& p) {
  return std::atan2(p.y() - o.y(), p.x() - o.x());
}
double meas_el(const Vec3& o, const Vec3& p) {
  return std::atan2(p.z() - o.z(),
                    std::hypot(p.x() - o.x(), p.y() - o.y()));
}

template <typename F>
RVec central_grad(F&& f, const Vec3& p, double h) {
  RVec g(3);
  for (int a = 0; a < 3; ++a) {
    Vec3 hi = p, lo = p;
    hi[a] += h;
    lo[a] -= h;
    g[a] = (f(hi) - f(lo)) / (2 * h);
  }
  return g;
}

// Four-point central second differences.
template <typename F>
RMat numerical_hessian(F&& f, const RVec& th0, const RVec& steps) {
  const int n = static_cast<int>(th0.size());
  RMat h(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      RVec a = th0, b = th0, c = th0, d = th0;
      if (i == j) {
        a[i] += steps[i];
        b[i] -= steps[i];
        h(i, i) = (f(a) - 2 * f(th0) + f(b)) / (steps[i] * steps[i]);
      } else {
        a[i] += steps[i]; a[j] += steps[j];
        b[i] += steps[i]; b[j] -= steps[j];
        c[i] -= steps[i]; c[j] += steps[j];
        d[i] -= steps[i]; d[j] -= steps[j];
        h(i, j) = h(j, i) =
            (f(a) - f(b) - f(c) + f(d)) / (4 * steps[i] * steps[j]);
      }
    }
  }
  return h;
}

Scene small_static_scene(StreamRng& rng, int max_q = 3) {
  Scene s;
  const int Q = 1 + static_cast<int>(rng.next_u64() % max_q);
  for (int q = 0; q < Q; ++q) {
    RadarUnit r = ula_radar(
        Vec3(2.0 * rng.normal(), 0.5 * rng.normal(), 0.3 * rng.normal()),
        1 + static_cast<int>(rng.next_u64() % 2),
        1 + static_cast<int>(rng.next_u64() % 2), 0.0078, 0.00195,
        76e9 + 2e9 * rng.uniform());
    r.n_chirps = 1 + static_cast<int>(rng.next_u64() % 2);
    r.fs_hz = (1 + static_cast<int>(rng.next_u64() % 8)) / r.chirp_s;
    s.radars.push_back(r);
  }
  // Shared frame layout across sensors.
  for (auto& r : s.radars) {
    r.n_chirps = s.radars[0].n_chirps;
    r.fs_hz = s.radars[0].fs_hz;
    r.tx_offsets = s.radars[0].tx_offsets;
    r.rx_offsets = s.radars[0].rx_offsets;
  }
  return s;
}

}  // namespace

TEST_CASE("pcf_jacobian closed forms at boresight") {
  Scene s = dsrtest::one_radar_scene(point_radar(Vec3(0, 0, 0)));
  const RMat j = pcf_jacobian(s, Vec3(0, 25, 0));
  REQUIRE(j.rows() == 3);
  CHECK(j(0, 0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(j(0, 1) == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(j(0, 2) == Catch::Approx(0.0).margin(1e-15));
  CHECK(j(1, 0) == Catch::Approx(-0.04).epsilon(1e-14));
  CHECK(j(1, 1) == Catch::Approx(0.0).margin(1e-15));
  CHECK(j(1, 2) == 0.0);  // azimuth never depends on z
  CHECK(j(2, 0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(j(2, 1) == Catch::Approx(0.0).margin(1e-15));
  CHECK(j(2, 2) == Catch::Approx(0.04).epsilon(1e-14));
}

TEST_CASE("pcf_jacobian matches central finite differences") {
  StreamRng rng(11, 2);
  for (int trial = 0; trial < 40; ++trial) {
    const Vec3 origin(3 * rng.normal(), 0.5 * rng.normal(), 0.2 * rng.normal());
    Scene s = dsrtest::one_radar_scene(point_radar(origin));
    const Vec3 p(8 * rng.normal(), 15 + 10 * rng.uniform(),
                 2 * rng.normal());
    const RMat j = pcf_jacobian(s, p);
    const double h = 1e-5;
    const RVec gr = central_grad(
        [&](const Vec3& x) { return meas_range(origin, x); }, p, h);
    const RVec ga = central_grad(
        [&](const Vec3& x) { return meas_az(origin, x); }, p, h);
    const RVec ge = central_grad(
        [&](const Vec3& x) { return meas_el(origin, x); }, p, h);
    REQUIRE((j.row(0).transpose() - gr).norm() < 1e-6 * gr.norm());
    REQUIRE((j.row(1).transpose() - ga).norm() < 1e-6 * std::max(ga.norm(), 1e-6));
    REQUIRE((j.row(2).transpose() - ge).norm() < 1e-6 * std::max(ge.norm(), 1e-6));
  }
}

TEST_CASE("pcf_jacobian rejects degenerate geometry") {
  Scene s = dsrtest::one_radar_scene(point_radar(Vec3(0, 0, 0)));
  CHECK_THROWS_AS(pcf_jacobian(s, Vec3(0, 0, 0)), DegenerateGeometryError);
  CHECK_THROWS_AS(pcf_jacobian(s, Vec3(0, 0, 3)), DegenerateGeometryError);
}

TEST_CASE("steering_gradient matches finite differences of the steering vector") {
  StreamRng rng(21, 3);
  for (int trial = 0; trial < 20; ++trial) {
    Scene s = small_static_scene(rng);
    const Vec3 p(6 * rng.normal(), 20 + 10 * rng.uniform(), rng.normal());
    const SteeringGradient g = steering_gradient(s, p);
    const double h = 1e-6;
    const CVec* u[3] = {&g.ux, &g.uy, &g.uz};
    for (int a = 0; a < 3; ++a) {
      Vec3 hi = p, lo = p;
      hi[a] += h;
      lo[a] -= h;
      const CVec fd =
          (steering_vector(s, hi) - steering_vector(s, lo)) / (2 * h);
      const double scale = std::max(u[a]->norm(), 1e-9);
      REQUIRE((fd - *u[a]).norm() / scale < 1e-4);
    }
  }
}

TEST_CASE("steering_gradient requires a static scene") {
  Scene s = dsrtest::one_radar_scene(point_radar(Vec3(0, 0, 0)));
  s.ego_velocity = Vec3(0, 1, 0);
  CHECK_THROWS_AS(steering_gradient(s, Vec3(0, 25, 0)), std::invalid_argument);
}

TEST_CASE("non-coherent local FIM matches the likelihood Hessian") {
  Scene s;
  RadarUnit r0 = ula_radar(Vec3(0, 0, 0), 2, 2, 0.0078, 0.00195);
  r0.fs_hz = 0.8e6;  // Ns = 4
  r0.n_chirps = 1;
  RadarUnit r1 = r0;
  r1.origin = Vec3(1.5, 0.3, 0);
  s.radars = {r0, r1};
  const Vec3 p0(0.7, 22.0, 0.0);
  const std::vector<cplx> alphas = {cplx(0.8, -0.3), cplx(-0.5, 1.1)};
  MeasurementNoise noise;
  noise.raw_variance = 0.7;

  const RMat f = ncp_fim_local(s, noise, p0, alphas);
  REQUIRE(f.rows() == 2 + 2 * 2);

  // Oracle: negative Hessian of the explicit Gaussian log-likelihood at the
  // truth, with data fixed at the noise-free mean.
  const auto mean_of = [&](const RVec& th) -> CVec {
    const Vec3 p(th[0], th[1], 0.0);
    CVec m(static_cast<Eigen::Index>(s.total_samples()));
    Eigen::Index off = 0;
    for (int q = 0; q < 2; ++q) {
      const CVec hq = steering_vector_sensor(s, q, p);
      m.segment(off, hq.size()) = cplx(th[2 + 2 * q], th[3 + 2 * q]) * hq;
      off += hq.size();
    }
    return m;
  };
  RVec th0(6);
  th0 << p0.x(), p0.y(), alphas[0].real(), alphas[0].imag(), alphas[1].real(),
      alphas[1].imag();
  const CVec z0 = mean_of(th0);
  const auto loglik = [&](const RVec& th) {
    return -(z0 - mean_of(th)).squaredNorm() / noise.raw_variance;
  };
  RVec steps(6);
  steps << 1e-6, 1e-6, 1e-4, 1e-4, 1e-4, 1e-4;
  const RMat fd = -numerical_hessian(loglik, th0, steps);
  REQUIRE((fd - f).norm() / f.norm() < 1e-3);

  // Published block structure: per-sensor real/imag diagonal equal, no
  // real-imag coupling, no cross-sensor coupling.
  CHECK(f(2, 3) == Catch::Approx(0.0).margin(1e-9 * f(2, 2)));
  CHECK(f(2, 4) == Catch::Approx(0.0).margin(1e-9 * f(2, 2)));
  CHECK(f(2, 2) == Catch::Approx(f(3, 3)).epsilon(1e-12));
  CHECK(f(2, 2) ==
        Catch::Approx(2.0 * 16.0 / noise.raw_variance).epsilon(1e-12));
}

TEST_CASE("coherent local FIM matches the likelihood Hessian") {
  Scene s;
  RadarUnit r0 = ula_radar(Vec3(0, 0, 0), 1, 2, 0.0078, 0.00195);
  r0.fs_hz = 0.8e6;
  r0.n_chirps = 2;
  RadarUnit r1 = r0;
  r1.origin = Vec3(2.0, 0, 0);
  r1.carrier_hz = 78e9;
  s.radars = {r0, r1};
  const Vec3 p0(-0.4, 18.0, 0.0);
  const cplx alpha(0.6, -0.8);
  MeasurementNoise noise;
  noise.raw_variance = 1.3;
  BoundOptions opts;
  opts.coherent_alpha_power = true;

  const RMat f = cp_fim_local(s, noise, p0, alpha, opts);
  REQUIRE(f.rows() == 4);

  const auto mean_of = [&](const RVec& th) -> CVec {
    return cplx(th[2], th[3]) * steering_vector(s, Vec3(th[0], th[1], 0.0));
  };
  RVec th0(4);
  th0 << p0.x(), p0.y(), alpha.real(), alpha.imag();
  const CVec z0 = mean_of(th0);
  const auto loglik = [&](const RVec& th) {
    return -(z0 - mean_of(th)).squaredNorm() / noise.raw_variance;
  };
  RVec steps(4);
  steps << 1e-6, 1e-6, 1e-4, 1e-4;
  const RMat fd = -numerical_hessian(loglik, th0, steps);
  REQUIRE((fd - f).norm() / f.norm() < 1e-3);

  // |alpha| = 1 here, so the published scaling and the conditional reading
  // coincide by default; an explicit prior variance rescales the position
  // block only.
  BoundOptions printed;
  const RMat f_default = cp_fim_local(s, noise, p0, alpha, printed);
  REQUIRE((f_default - f).norm() < 1e-12 * f.norm());
  printed.signal_variance = 2.0;
  const RMat f2 = cp_fim_local(s, noise, p0, alpha, printed);
  CHECK(f2(0, 0) == Catch::Approx(2.0 * f(0, 0)).epsilon(1e-12));
  CHECK(f2(0, 2) == Catch::Approx(f(0, 2)).epsilon(1e-12));
  CHECK(f2(2, 2) == Catch::Approx(f(2, 2)).epsilon(1e-12));
}

TEST_CASE("Schur complement equals the position block of the full inverse") {
  // Low carrier keeps the joint FIM invertible in double precision; at
  // automotive carriers the pre-Schur position information dwarfs the
  // post-Schur residual and the full matrix is numerically singular.
  Scene s;
  s.radars = {ula_radar(Vec3(0, 0, 0), 2, 4, 0.15, 0.0375, 1e9),
              ula_radar(Vec3(3, 0, 0), 2, 4, 0.15, 0.0375, 1e9)};
  for (auto& r : s.radars) {
    r.fs_hz = 1.6e6;
    r.n_chirps = 2;
    r.bandwidth_hz = 2e9;
  }
  const std::vector<cplx> alphas = {cplx(1, 0), cplx(0.5, 0.5)};
  MeasurementNoise noise;
  noise.raw_variance = 2.0;
  PriorSpec prior;
  prior.mean = Vec3(-8, 12, 0);
  BoundOptions opts;
  opts.kind = BoundKind::crlb;

  const FimResult r = ncp_bcrlb(s, noise, prior, alphas, opts);
  const RMat full = ncp_fim_local(s, noise, prior.mean, alphas);
  const RMat full_inv = invert_spd(full);
  REQUIRE((full_inv.topLeftCorner(2, 2) - r.bound).norm() <
          1e-9 * r.bound.norm());
  // FimResult invariant.
  REQUIRE((r.bound * r.fim - RMat::Identity(2, 2)).norm() < 1e-9);
}

TEST_CASE("pcf bound improves with more sensors") {
  Scene s3;
  s3.radars = {point_radar(Vec3(0, 0, 0)), point_radar(Vec3(1, 0, 0)),
               point_radar(Vec3(2, 0, 0))};
  PriorSpec prior;
  prior.mean = Vec3(0, 50, 0);
  prior.covariance = 0.01 * Eigen::Matrix3d::Identity();
  MeasurementNoise noise;  // 0.06 m, 0.02 deg defaults
  BoundOptions opts;
  opts.kind = BoundKind::crlb;

  const FimResult b3 = pcf_bcrlb(s3, noise, prior, opts);
  const FimResult b1 = pcf_bcrlb(s3.single_sensor(0), noise, prior, opts);
  CHECK(b3.avg_position_bound < b1.avg_position_bound);
  CHECK(b3.avg_position_bound > 0.0);
}

TEST_CASE("prior dominates when measurements are uninformative") {
  Scene s = dsrtest::one_radar_scene(point_radar(Vec3(0, 0, 0)));
  MeasurementNoise noise;
  noise.range_sigma_m = 1e9;
  noise.azimuth_sigma_rad = 1e9;
  PriorSpec prior;
  prior.mean = Vec3(0, 40, 0);
  prior.covariance = 0.01 * Eigen::Matrix3d::Identity();
  prior.n_mc = 4;
  const FimResult r = pcf_bcrlb(s, noise, prior);
  CHECK(r.bound(0, 0) == Catch::Approx(0.01).epsilon(1e-3));
  CHECK(r.bound(1, 1) == Catch::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("unobservable axis is flagged without a prior and bounded with one") {
  Scene s = dsrtest::one_radar_scene(point_radar(Vec3(0, 0, 0)));
  MeasurementNoise noise;
  noise.azimuth_sigma_rad = std::numeric_limits<double>::infinity();
  PriorSpec prior;
  prior.mean = Vec3(0, 40, 0);  // boresight: range carries no x information
  BoundOptions det;
  det.kind = BoundKind::crlb;
  CHECK_THROWS_AS(pcf_bcrlb(s, noise, prior, det), ConditioningError);

  prior.n_mc = 8;
  const FimResult r = pcf_bcrlb(s, noise, prior);
  CHECK(r.bound(0, 0) == Catch::Approx(0.01).epsilon(1e-2));
  // Range info alone: 1 / (1/0.06^2 + 1/0.01), well under the prior cap.
  CHECK(r.bound(1, 1) == Catch::Approx(1.0 / (1.0 / 0.0036 + 100.0)).epsilon(0.02));
}

TEST_CASE("bayesian bound never exceeds the deterministic bound") {
  Scene s;
  s.radars = {ula_radar(Vec3(0, 0, 0), 2, 4, 0.0078, 0.00195),
              ula_radar(Vec3(1, 0, 0), 2, 4, 0.0078, 0.00195),
              ula_radar(Vec3(2, 0, 0), 2, 4, 0.0078, 0.00195)};
  for (auto& r : s.radars) {
    r.bandwidth_hz = 150e6;
    r.fs_hz = 10e6;
    r.n_chirps = 2;
  }
  const std::vector<cplx> alphas(3, cplx(1, 0));
  MeasurementNoise noise;
  noise.raw_variance = 1000.0;  // -30 dB against unit signal power
  PriorSpec prior;
  prior.covariance = 0.01 * Eigen::Matrix3d::Identity();
  prior.n_mc = 10;
  BoundOptions det;
  det.kind = BoundKind::crlb;
  BoundOptions bay;

  for (const Vec3 p : {Vec3(10, 40, 0), Vec3(-20, 70, 0), Vec3(0, 25, 0)}) {
    PriorSpec pr = prior;
    pr.mean = p;
    const double ncp_det =
        ncp_bcrlb(s, noise, pr, alphas, det).avg_position_bound;
    const double ncp_bay =
        ncp_bcrlb(s, noise, pr, alphas, bay).avg_position_bound;
    REQUIRE(ncp_bay <= ncp_det * (1 + 1e-9));
    const double cp_det =
        cp_bcrlb(s, noise, pr, alphas[0], det).avg_position_bound;
    const double cp_bay =
        cp_bcrlb(s, noise, pr, alphas[0], bay).avg_position_bound;
    REQUIRE(cp_bay <= cp_det * (1 + 1e-9));
    // Coherent processing cannot be worse than non-coherent.
    REQUIRE(cp_det <= ncp_det * (1 + 1e-9));
    REQUIRE(cp_bay <= ncp_bay * (1 + 1e-9));
  }
}

TEST_CASE("derived point-cloud noise keeps the fusion bound above the raw bound") {
  Scene s;
  s.radars = {ula_radar(Vec3(0, 0, 0), 2, 4, 0.0078, 0.00195),
              ula_radar(Vec3(1, 0, 0), 2, 4, 0.0078, 0.00195),
              ula_radar(Vec3(2, 0, 0), 2, 4, 0.0078, 0.00195)};
  for (auto& r : s.radars) {
    r.bandwidth_hz = 150e6;
    r.fs_hz = 10e6;
    r.n_chirps = 2;
  }
  const std::vector<cplx> alphas(3, cplx(1, 0));
  MeasurementNoise noise;
  noise.raw_variance = 1000.0;
  noise.pcf_derived_from_raw = true;
  noise.pcf_inflation = 2.0;
  PriorSpec prior;
  prior.mean = Vec3(5, 45, 0);
  BoundOptions det;
  det.kind = BoundKind::crlb;

  const double pcf = pcf_bcrlb(s, noise, prior, det, alphas).avg_position_bound;
  const double ncp = ncp_bcrlb(s, noise, prior, alphas, det).avg_position_bound;
  REQUIRE(ncp < pcf);
  // Inflation factor appears linearly in the derived covariance.
  const RMat cov2 = derived_pcf_covariance(s, 0, prior.mean, noise, alphas[0]);
  MeasurementNoise n1 = noise;
  n1.pcf_inflation = 1.0;
  const RMat cov1 = derived_pcf_covariance(s, 0, prior.mean, n1, alphas[0]);
  REQUIRE((cov2 - 2.0 * cov1).norm() < 1e-12 * cov1.norm());
  Eigen::SelfAdjointEigenSolver<RMat> es(cov1);
  REQUIRE(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("bound_contour flags degenerate cells and is thread-invariant") {
  Scene s;
  s.radars = {point_radar(Vec3(0, 0, 0))};
  s.radars[0].fs_hz = 1.6e6;
  s.radars[0].n_chirps = 2;
  const ImagingGrid grid = ImagingGrid::from_spacing(-50, 50, 0, 100, 25);
  MeasurementNoise noise;
  ContourSpec spec;
  spec.mode = BoundMode::pcf;
  spec.n_mc = 3;
  spec.options.seed = 5;
  spec.options.kind = BoundKind::crlb;

  const RMat a = bound_contour(s, noise, grid, spec);
  REQUIRE(a.rows() == grid.ny);
  REQUIRE(a.cols() == grid.nx);
  // The cell at the radar origin cannot be evaluated deterministically;
  // Bayesian draws step off the singular point and stay finite.
  REQUIRE(std::isnan(a(0, 2)));
  REQUIRE(std::isfinite(a(2, 2)));
  ContourSpec bay = spec;
  bay.options.kind = BoundKind::bcrlb;
  REQUIRE(std::isfinite(bound_contour(s, noise, grid, bay)(0, 2)));

  ContourSpec spec3 = spec;
  spec3.threads = 3;
  const RMat b = bound_contour(s, noise, grid, spec3);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      if (std::isnan(a(i, j))) {
        REQUIRE(std::isnan(b(i, j)));
      } else {
        REQUIRE(a(i, j) == b(i, j));
      }
    }
}
