#include <catch2/catch_amalgamated.hpp>

#include "dsr/dictionary.hpp"
#include "test_helpers.hpp"

using namespace dsr;
using dsrtest::point_radar;
using dsrtest::ula_radar;

namespace {

Scene moving_scene(int n_radars) {
  Scene s;
  const double xs[] = {0.0, 1.5, 3.0};
  for (int q = 0; q < n_radars; ++q) {
    RadarUnit r = ula_radar(Vec3(xs[q], 0, 0), 2, 2, 0.0078, 0.00195);
    r.fs_hz = 1.6e6;  // Ns = 8
    r.n_chirps = 2;
    r.sync_offset_s = q * 4e-6;
    s.radars.push_back(r);
  }
  s.ego_velocity = Vec3(0, 12, 0);
  return s;
}

const ImagingGrid kGrid = ImagingGrid::from_spacing(-2, 2, 20, 24, 1.0);

}  // namespace

TEST_CASE("single-cell single-sensor dictionary is the steering vector") {
  Scene s = dsrtest::one_radar_scene(point_radar(Vec3(0, 0, 0)));
  s.radars[0].fs_hz = 1.6e6;
  s.radars[0].n_chirps = 1;
  ImagingGrid g{};
  g.x_min = 0.5;
  g.y_min = 22;
  g.dx = g.dy = 1;
  g.nx = g.ny = 1;
  BlockDictionary d = build_block_dictionary(s, g);
  REQUIRE(d.rows() == 8);
  REQUIRE(d.cols() == 1);
  const CVec h = steering_vector(s, Vec3(0.5, 22, 0));
  REQUIRE((d.column(0) - h).norm() < 1e-9 * h.norm());
}

TEST_CASE("block dictionary layout, laziness and norms") {
  Scene s = moving_scene(2);
  BlockDictionary d = build_block_dictionary(s, kGrid);
  const int Q = 2;
  REQUIRE(d.cols() == kGrid.size() * Q);
  REQUIRE(d.rows() == 2 * 2 * 2 * 2 * 8);
  REQUIRE(d.block_begin(3) == 3 * Q);
  REQUIRE(d.cell_of(7) == 3);
  REQUIRE(d.sensor_of(7) == 1);

  // Lazy regeneration is bit-identical.
  const CVec c1 = d.column(9);
  const CVec c2 = d.column(9);
  REQUIRE(c1 == c2);

  // Sensor-q column occupies only sensor-q rows.
  const Eigen::Index seg = d.rows() / Q;
  REQUIRE(c1.head(seg).norm() == 0.0);
  REQUIRE(c1.tail(seg).norm() > 0.0);

  // Cross-sensor columns are exactly orthogonal (disjoint support).
  REQUIRE(d.column(4).dot(d.column(9)) == cplx(0.0, 0.0));

  // Analytic norms match generated columns.
  const RVec norms = d.column_norms();
  REQUIRE(norms.size() == d.cols());
  REQUIRE(norms[9] == Catch::Approx(std::sqrt(double(seg))).epsilon(1e-12));
  REQUIRE(c1.norm() == Catch::Approx(norms[9]).epsilon(1e-12));

  // apply/adjoint are consistent with column generation.
  CVec e = CVec::Zero(d.cols());
  e[9] = cplx(1.0, 0.0);
  REQUIRE(d.apply(e) == c1);
  StreamRng rng(3, 1);
  CVec y(d.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.cnormal(1.0);
  const CVec corr = d.adjoint(y);
  REQUIRE(corr[9] == c1.dot(y));
  // <Hx, y> == <x, H^H y>
  CVec x(d.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.cnormal(1.0);
  const cplx lhs = d.apply(x).dot(y);
  const cplx rhs = x.dot(corr);
  REQUIRE(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
}

TEST_CASE("true-block least squares recovers per-sensor alpha times c_q") {
  Scene s = moving_scene(3);
  Target t;
  t.position = kGrid.cell_position(7);
  t.reflectivity = {cplx(0.9, -0.4), cplx(-0.3, 0.7), cplx(0.5, 0.5)};
  s.targets = {t};
  const BasebandCube cube = synthesize_noncoherent(s, {});
  BlockDictionary d = build_block_dictionary(s, kGrid);

  for (int q = 0; q < 3; ++q) {
    const CVec col = d.column(d.block_begin(7) + q);
    const cplx ls = col.dot(cube.samples) / col.squaredNorm();
    const double v = direction_and_doppler(s, q, t.position).speed;
    const cplx want = t.reflectivity[q] * sync_phase(s.radars[q], v);
    REQUIRE(std::abs(ls - want) < 1e-10);
  }
}

TEST_CASE("coherent dictionary with zero offsets is the plain steering stack") {
  Scene s = moving_scene(2);
  CoherentDictionary d = build_coherent_dictionary(s, kGrid, {0.0, 0.0});
  REQUIRE(d.cols() == kGrid.size());
  const CVec h = steering_vector(s, kGrid.cell_position(11));
  // Identical up to large-phase rounding (|phase| ~ 1e5 rad, so ~1e-11/sample
  // between split and fused phase evaluation).
  REQUIRE((d.column(11) - h).norm() < 1e-9 * h.norm());
  CHECK_THROWS_AS(build_coherent_dictionary(s, kGrid, {0.0}),
                  std::invalid_argument);
}

TEST_CASE("coherent dictionary with the true offsets is collinear with data") {
  Scene s = moving_scene(3);
  Target t;
  t.position = kGrid.cell_position(13);
  t.reflectivity = std::vector<cplx>(3, cplx(0.7, -0.2));
  s.targets = {t};
  const BasebandCube cube = synthesize_coherent(s, {});
  CoherentDictionary d =
      build_coherent_dictionary(s, kGrid, {0.0, 4e-6, 8e-6});
  const CVec col = d.column(13);
  const double corr =
      std::abs(col.dot(cube.samples)) / (col.norm() * cube.samples.norm());
  REQUIRE(corr == Catch::Approx(1.0).epsilon(1e-12));

  // A pi phase error on sensor 2's c factor breaks the coherent sum.
  const double v1 = direction_and_doppler(s, 1, t.position).speed;
  const double half_cycle =
      kSpeedOfLight / (4.0 * s.radars[1].carrier_hz * std::abs(v1));
  CoherentDictionary bad =
      build_coherent_dictionary(s, kGrid, {0.0, 4e-6 + half_cycle, 8e-6});
  const CVec bcol = bad.column(13);
  const double bad_corr =
      std::abs(bcol.dot(cube.samples)) / (bcol.norm() * cube.samples.norm());
  REQUIRE(bad_corr < corr - 0.5);
  REQUIRE(bad_corr == Catch::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("ptrf peaks at the true cell and ignores global reflectivity phase") {
  Scene s = moving_scene(2);
  const Vec3 p0 = kGrid.cell_position(12);
  const RMat m = ptrf(s, kGrid, p0, PtrfMode::noncoherent);
  REQUIRE(m.rows() == kGrid.ny);
  REQUIRE(m.cols() == kGrid.nx);
  REQUIRE(m(12 / kGrid.nx, 12 % kGrid.nx) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(m.maxCoeff() <= 1.0 + 1e-12);

  const std::vector<cplx> a1 = {cplx(0.8, 0.1), cplx(-0.2, 0.6)};
  std::vector<cplx> a2 = a1;
  const cplx rot = std::polar(1.0, 1.1);
  for (auto& a : a2) a *= rot;
  const RMat m1 = ptrf(s, kGrid, p0, PtrfMode::noncoherent, a1);
  const RMat m2 = ptrf(s, kGrid, p0, PtrfMode::noncoherent, a2);
  REQUIRE((m1 - m2).norm() < 1e-12);
}

TEST_CASE("noncoherent ptrf is the weighted sum of per-sensor responses") {
  Scene s = moving_scene(3);
  const Vec3 p0 = kGrid.cell_position(7);
  std::vector<Vec3> pts;
  for (int l = 0; l < kGrid.size(); ++l) pts.push_back(kGrid.cell_position(l));
  const std::vector<cplx> alphas = {cplx(1.2, 0), cplx(0, -0.5),
                                    cplx(0.3, 0.4)};
  const RVec ncp = ptrf_values(s, pts, p0, PtrfMode::noncoherent, alphas);
  RVec want = RVec::Zero(ncp.size());
  for (int q = 0; q < 3; ++q) {
    const Scene sub = s.single_sensor(q);
    want += std::norm(alphas[q]) *
            ptrf_values(sub, pts, p0, PtrfMode::single);
  }
  REQUIRE((ncp - want).norm() < 1e-10 * want.norm());
}

TEST_CASE("coherent ptrf with one sensor equals single mode") {
  Scene s = moving_scene(1);
  std::vector<Vec3> pts;
  for (int l = 0; l < kGrid.size(); ++l) pts.push_back(kGrid.cell_position(l));
  const RVec cp = ptrf_values(s, pts, kGrid.cell_position(5),
                              PtrfMode::coherent);
  const RVec single = ptrf_values(s, pts, kGrid.cell_position(5),
                                  PtrfMode::single);
  REQUIRE((cp - single).norm() < 1e-12 * single.norm());
}

TEST_CASE("range cut half-power width matches the analytic resolution") {
  // 500 MHz sweep observed over the full chirp: -3 dB width of the matched
  // beat response is 0.886 * c / (2B) = 0.266 m.
  Scene s = dsrtest::one_radar_scene(point_radar(Vec3(0, 0, 0)));
  REQUIRE(s.radars[0].fast_time_samples() == 150);
  const Vec3 p0(0, 25, 0);
  const int n = 241;
  std::vector<Vec3> pts(n);
  RVec ys(n);
  for (int i = 0; i < n; ++i) {
    ys[i] = 24.4 + 0.005 * i;
    pts[i] = Vec3(0, ys[i], 0);
  }
  const RVec vals = ptrf_values(s, pts, p0, PtrfMode::single);
  const double width = half_power_width(ys, vals);
  REQUIRE(width == Catch::Approx(0.886 * kSpeedOfLight / (2 * 500e6))
                       .epsilon(0.02));
}

TEST_CASE("half_power_width interpolates and flags missing crossings") {
  RVec xs(5), vals(5);
  xs << 0, 1, 2, 3, 4;
  vals << 0, 0.5, 1.0, 0.5, 0;
  REQUIRE(half_power_width(xs, vals) ==
          Catch::Approx(4.0 - 2.0 * std::sqrt(2.0)).epsilon(1e-12));
  vals << 0.9, 0.95, 1.0, 0.95, 0.9;
  REQUIRE(std::isnan(half_power_width(xs, vals)));
  CHECK_THROWS_AS(half_power_width(xs.head(3), vals), std::invalid_argument);
}

TEST_CASE("gaussian compressor is seeded, sized and energy-preserving") {
  const Compressor c = Compressor::make_gaussian(64, 256, 7);
  REQUIRE(c.out_rows() == 64);
  REQUIRE(c.in_rows == 256);
  const Compressor c2 = Compressor::make_gaussian(64, 256, 7);
  REQUIRE(c.matrix == c2.matrix);
  REQUIRE(Compressor::make_gaussian(64, 256, 8).matrix != c.matrix);
  // E ||G x||^2 = ||x||^2 for CN(0, 1/P) entries.
  StreamRng rng(1, 9);
  double ratio = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    CVec x(256);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.cnormal(1.0);
    const Compressor g = Compressor::make_gaussian(64, 256, 100 + t);
    ratio += compress(x, g).squaredNorm() / x.squaredNorm();
  }
  REQUIRE(ratio / trials == Catch::Approx(1.0).margin(0.1));
  CHECK_THROWS_AS(Compressor::make_gaussian(0, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(Compressor::make_gaussian(5, 4, 1), std::invalid_argument);
}

TEST_CASE("subsample compressor selects distinct rows; full size is identity") {
  const Compressor c = Compressor::make_subsample(6, 20, 3);
  REQUIRE(c.out_rows() == 6);
  for (std::size_t i = 1; i < c.keep.size(); ++i) {
    REQUIRE(c.keep[i] > c.keep[i - 1]);
  }
  CVec v(20);
  for (int i = 0; i < 20; ++i) v[i] = cplx(i, -i);
  const CVec out = compress(v, c);
  for (Eigen::Index i = 0; i < 6; ++i) REQUIRE(out[i] == v[c.keep[i]]);

  const Compressor full = Compressor::make_subsample(20, 20, 3);
  REQUIRE(compress(v, full) == v);
  // Adjoint scatters back.
  const CVec back = compress_adjoint(out, c);
  REQUIRE(back[c.keep[2]] == out[2]);
  REQUIRE(back.squaredNorm() == Catch::Approx(out.squaredNorm()));
  CHECK_THROWS_AS(compress(v.head(5).eval(), c), std::invalid_argument);
}

TEST_CASE("compressed operator view stays consistent with the base") {
  Scene s = moving_scene(2);
  BlockDictionary d = build_block_dictionary(s, kGrid);
  const Compressor g = Compressor::make_gaussian(d.rows() / 4, d.rows(), 11);
  CompressedOperator cd(d, g);
  REQUIRE(cd.rows() == d.rows() / 4);
  REQUIRE(cd.cols() == d.cols());
  REQUIRE(cd.column(5) == compress(d.column(5), g));

  StreamRng rng(2, 4);
  CVec x(cd.cols()), y(cd.rows());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.cnormal(1.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.cnormal(1.0);
  REQUIRE((cd.apply(x) - compress(d.apply(x), g)).norm() < 1e-12);
  const CVec adj = cd.adjoint(y);
  REQUIRE(std::abs(adj[5] - cd.column(5).dot(y)) < 1e-10);
  CHECK_THROWS_AS(CompressedOperator(d, Compressor::make_gaussian(4, 8, 1)),
                  std::invalid_argument);
}

TEST_CASE("materialize honors the memory budget") {
  Scene s = moving_scene(2);
  BlockDictionary d = build_block_dictionary(s, kGrid);
  const std::size_t need = static_cast<std::size_t>(d.rows()) *
                           static_cast<std::size_t>(d.cols()) * sizeof(cplx);
  try {
    d.materialize(need - 1);
    FAIL("expected MemoryBudgetError");
  } catch (const MemoryBudgetError& e) {
    REQUIRE(std::string(e.what()).find(std::to_string(need)) !=
            std::string::npos);
  }
  const CMat m = d.materialize(need);
  REQUIRE(m.col(9) == d.column(9));
}
