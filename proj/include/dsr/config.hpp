#pragma once

// JSON run configuration: one file with sections scene / grid / solvers /
// experiment plus per-command sections (ptrf, bounds, image, sync). Angles
// are degrees in the file and radians internally. Validation collects every
// violated field before failing so a bad file is reported in one pass. The
// resolved configuration (defaults materialized) round-trips: feeding a
// written manifest back through the parser reproduces the same run.

#include "dsr/bounds.hpp"
#include "dsr/eval.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace dsr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PtrfConfig {
  Vec3 target = Vec3(0.0, 25.0, 0.0);
  bool target_set = false;  // explicit ptrf.target_m key present
};

struct BoundsPanel {
  std::string name;  // output stem, e.g. "pcf_crlb_q3"
  BoundMode mode = BoundMode::pcf;
  BoundKind kind = BoundKind::bcrlb;
  int n_radars = 0;  // 0 = all
};

struct BoundsConfig {
  MeasurementNoise noise;
  double prior_sigma_m = 0.1;
  int n_mc = 20;
  // The published panel set: point-cloud fusion CRLB/BCRLB at full sensor
  // count, point-cloud CRLB with the first sensor only, then CRLB/BCRLB for
  // non-coherent and coherent processing.
  std::vector<BoundsPanel> panels = {
      {"pcf_crlb_q3", BoundMode::pcf, BoundKind::crlb, 0},
      {"pcf_bcrlb_q3", BoundMode::pcf, BoundKind::bcrlb, 0},
      {"pcf_crlb_q1", BoundMode::pcf, BoundKind::crlb, 1},
      {"ncp_crlb", BoundMode::ncp, BoundKind::crlb, 0},
      {"ncp_bcrlb", BoundMode::ncp, BoundKind::bcrlb, 0},
      {"cp_crlb", BoundMode::cp, BoundKind::crlb, 0},
      {"cp_bcrlb", BoundMode::cp, BoundKind::bcrlb, 0},
  };
};

struct RunConfig {
  Scene scene;
  ImagingGrid grid;
  Experiment experiment;  // scene/grid/solvers embedded, ready to run
  PtrfConfig ptrf;
  BoundsConfig bounds;
  ScenarioKind scenario = ScenarioKind::medium_range_5tgt;
  std::uint64_t seed = 1;
  int threads = 1;
  nlohmann::json resolved;  // full configuration with defaults materialized
};

namespace detail {

using nlohmann::json;

// Collects "field: problem" strings so one parse reports every violation.
struct ConfigErrors {
  std::vector<std::string> items;

  void add(const std::string& where, const std::string& what) {
    items.push_back(where + ": " + what);
  }
  void raise_if_any() const {
    if (items.empty()) return;
    std::string msg = "invalid configuration:";
    for (const std::string& s : items) msg += "\n  " + s;
    throw ConfigError(msg);
  }
};

inline double get_num(const json& j, const std::string& where,
                      const std::string& key, double fallback,
                      ConfigErrors& errs) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) {
    errs.add(where + "." + key, "must be a number");
    return fallback;
  }
  return j.at(key).get<double>();
}

inline int get_int(const json& j, const std::string& where,
                   const std::string& key, int fallback, ConfigErrors& errs) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) {
    errs.add(where + "." + key, "must be an integer");
    return fallback;
  }
  return j.at(key).get<int>();
}

inline bool get_bool(const json& j, const std::string& where,
                     const std::string& key, bool fallback,
                     ConfigErrors& errs) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) {
    errs.add(where + "." + key, "must be a boolean");
    return fallback;
  }
  return j.at(key).get<bool>();
}

inline Vec3 get_vec3(const json& j, const std::string& where,
                     const std::string& key, const Vec3& fallback,
                     ConfigErrors& errs) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() ||
      !v[1].is_number() || !v[2].is_number()) {
    errs.add(where + "." + key, "must be an array of 3 numbers");
    return fallback;
  }
  return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

inline RadarUnit parse_radar(const json& j, const std::string& where,
                             ConfigErrors& errs) {
  RadarUnit r;
  r.origin = get_vec3(j, where, "origin_m", r.origin, errs);
  r.carrier_hz = get_num(j, where, "carrier_hz", r.carrier_hz, errs);
  r.bandwidth_hz = get_num(j, where, "bandwidth_hz", r.bandwidth_hz, errs);
  r.chirp_s = get_num(j, where, "chirp_s", r.chirp_s, errs);
  r.pri_s = get_num(j, where, "pri_s", r.pri_s, errs);
  r.fs_hz = get_num(j, where, "fs_hz", r.fs_hz, errs);
  r.n_chirps = get_int(j, where, "n_chirps", r.n_chirps, errs);
  r.sync_offset_s = get_num(j, where, "sync_offset_s", r.sync_offset_s, errs);

  const double lambda =
      r.carrier_hz > 0 ? kSpeedOfLight / r.carrier_hz : 0.0;
  // Uniform linear arrays along x, centered on the origin, spacing in
  // wavelengths; explicit element offsets override the shorthand.
  const auto ula = [&](const std::string& key, int count_dflt,
                       double spacing_dflt) {
    std::vector<Vec3> offsets;
    int count = count_dflt;
    double spacing = spacing_dflt;
    if (j.contains(key)) {
      const json& a = j.at(key);
      if (!a.is_object()) {
        errs.add(where + "." + key, "must be an object");
      } else {
        count = get_int(a, where + "." + key, "count", count_dflt, errs);
        spacing = get_num(a, where + "." + key, "spacing_wavelengths",
                          spacing_dflt, errs);
      }
    }
    if (count < 1) {
      errs.add(where + "." + key, "count must be >= 1");
      count = 1;
    }
    for (int i = 0; i < count; ++i) {
      const double pos = (i - 0.5 * (count - 1)) * spacing * lambda;
      offsets.push_back(Vec3(pos, 0.0, 0.0));
    }
    return offsets;
  };
  const auto explicit_offsets = [&](const std::string& key,
                                    std::vector<Vec3>& into) {
    if (!j.contains(key)) return false;
    const json& a = j.at(key);
    if (!a.is_array() || a.empty()) {
      errs.add(where + "." + key, "must be a non-empty array of [x,y,z]");
      return false;
    }
    into.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const json& e = a[i];
      if (!e.is_array() || e.size() != 3) {
        errs.add(where + "." + key + "[" + std::to_string(i) + "]",
                 "must be [x,y,z] meters");
        return false;
      }
      into.push_back(Vec3(e[0].get<double>(), e[1].get<double>(),
                          e[2].get<double>()));
    }
    return true;
  };
  if (!explicit_offsets("tx_offsets_m", r.tx_offsets)) {
    r.tx_offsets = ula("tx", 2, 2.0);
  }
  if (!explicit_offsets("rx_offsets_m", r.rx_offsets)) {
    r.rx_offsets = ula("rx", 4, 0.5);
  }
  return r;
}

inline Scene parse_scene(const json& root, ConfigErrors& errs) {
  Scene s;
  if (!root.contains("scene") || !root.at("scene").is_object()) {
    errs.add("scene", "section missing");
    return s;
  }
  const json& js = root.at("scene");
  s.ego_velocity =
      get_vec3(js, "scene", "ego_velocity_mps", Vec3::Zero(), errs);
  if (!js.contains("radars") || !js.at("radars").is_array() ||
      js.at("radars").empty()) {
    errs.add("scene.radars", "must be a non-empty array");
  } else {
    const json& jr = js.at("radars");
    for (std::size_t q = 0; q < jr.size(); ++q) {
      s.radars.push_back(
          parse_radar(jr[q], "scene.radars[" + std::to_string(q) + "]", errs));
    }
  }
  if (js.contains("targets")) {
    const json& jt = js.at("targets");
    if (!jt.is_array()) {
      errs.add("scene.targets", "must be an array");
    } else {
      for (std::size_t i = 0; i < jt.size(); ++i) {
        const std::string where = "scene.targets[" + std::to_string(i) + "]";
        const json& e = jt[i];
        Target t;
        t.position = get_vec3(e, where, "position_m", Vec3::Zero(), errs);
        const double gain_db = get_num(e, where, "gain_db", 0.0, errs);
        const double phase_deg = get_num(e, where, "phase_deg", 0.0, errs);
        const cplx alpha = std::polar(std::pow(10.0, gain_db / 20.0),
                                      phase_deg * kPi / 180.0);
        t.reflectivity.assign(s.radars.empty() ? 1 : s.radars.size(), alpha);
        s.targets.push_back(t);
      }
    }
  }
  if (!s.radars.empty()) {
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      errs.add("scene", e.what());
    }
  }
  return s;
}

inline ImagingGrid parse_grid(const json& root, ConfigErrors& errs) {
  if (!root.contains("grid") || !root.at("grid").is_object()) {
    errs.add("grid", "section missing");
    return ImagingGrid::from_counts(0, 0, 1, 1, 1, 1);
  }
  const json& jg = root.at("grid");
  const double x0 = get_num(jg, "grid", "x_min_m", 0.0, errs);
  const double x1 = get_num(jg, "grid", "x_max_m", 0.0, errs);
  const double y0 = get_num(jg, "grid", "y_min_m", 0.0, errs);
  const double y1 = get_num(jg, "grid", "y_max_m", 0.0, errs);
  const double sp = get_num(jg, "grid", "spacing_m", 1.0, errs);
  if (jg.contains("nx") || jg.contains("ny")) {
    const int nx = get_int(jg, "grid", "nx", 1, errs);
    const int ny = get_int(jg, "grid", "ny", 1, errs);
    if (nx < 1 || ny < 1) {
      errs.add("grid", "nx and ny must be >= 1");
      return ImagingGrid::from_counts(0, 0, 1, 1, 1, 1);
    }
    // Explicit per-axis spacing round-trips exactly (manifests carry it);
    // otherwise it is derived from the extent.
    double dx = get_num(jg, "grid", "spacing_x_m",
                        nx > 1 ? (x1 - x0) / (nx - 1) : 1.0, errs);
    double dy = get_num(jg, "grid", "spacing_y_m",
                        ny > 1 ? (y1 - y0) / (ny - 1) : 1.0, errs);
    if (!(dx > 0) || !(dy > 0)) {
      errs.add("grid", "spacing must be positive for the nx/ny form");
      return ImagingGrid::from_counts(0, 0, 1, 1, 1, 1);
    }
    return ImagingGrid::from_counts(x0, y0, dx, dy, nx, ny);
  }
  if (!(sp > 0) || !(x1 >= x0) || !(y1 >= y0)) {
    errs.add("grid", "extent must be non-decreasing and spacing_m positive");
    return ImagingGrid::from_counts(0, 0, 1, 1, 1, 1);
  }
  return ImagingGrid::from_spacing(x0, x1, y0, y1, sp);
}

inline SolverConfig parse_solver(const json& root, const std::string& name,
                                 const SolverConfig& base,
                                 ConfigErrors& errs) {
  SolverConfig c = base;
  if (!root.contains("solvers") || !root.at("solvers").contains(name)) {
    return c;
  }
  const json& j = root.at("solvers").at(name);
  const std::string where = "solvers." + name;
  c.max_sparsity = get_int(j, where, "max_sparsity", c.max_sparsity, errs);
  c.residual_tol = get_num(j, where, "residual_tol", c.residual_tol, errs);
  c.noise_variance =
      get_num(j, where, "noise_variance", c.noise_variance, errs);
  c.l1_weight = get_num(j, where, "l1_weight", c.l1_weight, errs);
  c.max_iters = get_int(j, where, "max_iters", c.max_iters, errs);
  c.rvm_beta_prune =
      get_num(j, where, "rvm_beta_prune", c.rvm_beta_prune, errs);
  c.rvm_fixed_beta =
      get_num(j, where, "rvm_fixed_beta", c.rvm_fixed_beta, errs);
  c.debias = get_bool(j, where, "debias", c.debias, errs);
  c.prune_gate = get_num(j, where, "prune_gate", c.prune_gate, errs);
  c.ridge_lambda = get_num(j, where, "ridge_lambda", c.ridge_lambda, errs);
  if (c.max_sparsity < 1) errs.add(where + ".max_sparsity", "must be >= 1");
  if (c.max_iters < 1) errs.add(where + ".max_iters", "must be >= 1");
  if (c.prune_gate < 0.0 || c.prune_gate >= 1.0) {
    errs.add(where + ".prune_gate", "must lie in [0, 1)");
  }
  if (c.noise_variance < 0.0) {
    errs.add(where + ".noise_variance", "must be >= 0");
  }
  return c;
}

inline Scheme parse_scheme(const std::string& s, const std::string& where,
                           ConfigErrors& errs) {
  if (s == "single_omp") return Scheme::single_omp;
  if (s == "bomp_ncp") return Scheme::bomp_ncp;
  if (s == "omp_cp") return Scheme::omp_cp;
  if (s == "bcs_cp") return Scheme::bcs_cp;
  errs.add(where,
           "unknown scheme '" + s +
               "' (valid: single_omp, bomp_ncp, omp_cp, bcs_cp)");
  return Scheme::single_omp;
}

inline ScenarioKind parse_scenario(const std::string& s,
                                   const std::string& where,
                                   ConfigErrors& errs) {
  if (s == "medium_range_5tgt") return ScenarioKind::medium_range_5tgt;
  if (s == "close_pair") return ScenarioKind::close_pair;
  if (s == "near_range_grid") return ScenarioKind::near_range_grid;
  errs.add(where, "unknown scenario '" + s +
                      "' (valid: medium_range_5tgt, close_pair, "
                      "near_range_grid)");
  return ScenarioKind::medium_range_5tgt;
}

inline void parse_experiment(const json& root, RunConfig& cfg,
                             ConfigErrors& errs) {
  Experiment& e = cfg.experiment;
  if (!root.contains("experiment")) return;
  const json& j = root.at("experiment");
  if (!j.is_object()) {
    errs.add("experiment", "must be an object");
    return;
  }
  if (j.contains("snr_db")) {
    const json& a = j.at("snr_db");
    if (!a.is_array() || a.empty()) {
      errs.add("experiment.snr_db", "must be a non-empty array of numbers");
    } else {
      e.snr_db.clear();
      for (const json& v : a) {
        if (!v.is_number()) {
          errs.add("experiment.snr_db", "must be a non-empty array of numbers");
          break;
        }
        e.snr_db.push_back(v.get<double>());
      }
    }
  }
  e.n_trials = get_int(j, "experiment", "n_trials", e.n_trials, errs);
  if (e.n_trials < 1) errs.add("experiment.n_trials", "must be >= 1");
  e.snr_reference_gain_db = get_num(j, "experiment", "snr_reference_gain_db",
                                    e.snr_reference_gain_db, errs);
  e.use_estimated_sync = get_bool(j, "experiment", "use_estimated_sync",
                                  e.use_estimated_sync, errs);
  e.amplitude_fading =
      get_bool(j, "experiment", "amplitude_fading", e.amplitude_fading, errs);
  e.anchor_isolation_m = get_num(j, "experiment", "anchor_isolation_m",
                                 e.anchor_isolation_m, errs);
  e.anchor_count =
      get_int(j, "experiment", "anchor_count", e.anchor_count, errs);
  if (e.anchor_count < 1) errs.add("experiment.anchor_count", "must be >= 1");
  if (j.contains("schemes")) {
    const json& a = j.at("schemes");
    if (!a.is_array() || a.empty()) {
      errs.add("experiment.schemes", "must be a non-empty array of names");
    } else {
      e.schemes.clear();
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_string()) {
          errs.add("experiment.schemes[" + std::to_string(i) + "]",
                   "must be a string");
          continue;
        }
        e.schemes.push_back(parse_scheme(
            a[i].get<std::string>(),
            "experiment.schemes[" + std::to_string(i) + "]", errs));
      }
    }
  }
}

inline void parse_bounds(const json& root, BoundsConfig& b,
                         ConfigErrors& errs) {
  if (!root.contains("bounds")) return;
  const json& j = root.at("bounds");
  if (!j.is_object()) {
    errs.add("bounds", "must be an object");
    return;
  }
  b.noise.range_sigma_m =
      get_num(j, "bounds", "range_sigma_m", b.noise.range_sigma_m, errs);
  b.noise.azimuth_sigma_rad =
      get_num(j, "bounds", "azimuth_sigma_deg",
              b.noise.azimuth_sigma_rad * 180.0 / kPi, errs) *
      kPi / 180.0;
  b.noise.elevation_sigma_rad =
      get_num(j, "bounds", "elevation_sigma_deg",
              b.noise.elevation_sigma_rad * 180.0 / kPi, errs) *
      kPi / 180.0;
  b.noise.raw_variance =
      get_num(j, "bounds", "raw_variance", b.noise.raw_variance, errs);
  b.noise.pcf_derived_from_raw = get_bool(
      j, "bounds", "pcf_derived_from_raw", b.noise.pcf_derived_from_raw, errs);
  b.noise.pcf_inflation =
      get_num(j, "bounds", "pcf_inflation", b.noise.pcf_inflation, errs);
  b.prior_sigma_m =
      get_num(j, "bounds", "prior_sigma_m", b.prior_sigma_m, errs);
  b.n_mc = get_int(j, "bounds", "n_mc", b.n_mc, errs);
  if (b.n_mc < 1) errs.add("bounds.n_mc", "must be >= 1");
  if (!(b.prior_sigma_m > 0)) {
    errs.add("bounds.prior_sigma_m", "must be positive");
  }
}

inline json resolve_config(const RunConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  root["threads"] = cfg.threads;

  json js;
  js["ego_velocity_mps"] = {cfg.scene.ego_velocity.x(),
                            cfg.scene.ego_velocity.y(),
                            cfg.scene.ego_velocity.z()};
  js["radars"] = json::array();
  for (const RadarUnit& r : cfg.scene.radars) {
    json jr;
    jr["origin_m"] = {r.origin.x(), r.origin.y(), r.origin.z()};
    jr["carrier_hz"] = r.carrier_hz;
    jr["bandwidth_hz"] = r.bandwidth_hz;
    jr["chirp_s"] = r.chirp_s;
    jr["pri_s"] = r.pri_s;
    jr["fs_hz"] = r.fs_hz;
    jr["n_chirps"] = r.n_chirps;
    jr["sync_offset_s"] = r.sync_offset_s;
    jr["tx_offsets_m"] = json::array();
    for (const Vec3& o : r.tx_offsets) {
      jr["tx_offsets_m"].push_back({o.x(), o.y(), o.z()});
    }
    jr["rx_offsets_m"] = json::array();
    for (const Vec3& o : r.rx_offsets) {
      jr["rx_offsets_m"].push_back({o.x(), o.y(), o.z()});
    }
    js["radars"].push_back(jr);
  }
  js["targets"] = json::array();
  for (const Target& t : cfg.scene.targets) {
    json jt;
    jt["position_m"] = {t.position.x(), t.position.y(), t.position.z()};
    const cplx a = t.reflectivity.empty() ? cplx(1.0, 0.0)
                                          : t.reflectivity.front();
    jt["gain_db"] =
        std::abs(a) > 0.0 ? 20.0 * std::log10(std::abs(a)) : -300.0;
    jt["phase_deg"] = std::arg(a) * 180.0 / kPi;
    js["targets"].push_back(jt);
  }
  root["scene"] = js;

  json jg;
  jg["x_min_m"] = cfg.grid.x_min;
  jg["x_max_m"] = cfg.grid.x_max();
  jg["y_min_m"] = cfg.grid.y_min;
  jg["y_max_m"] = cfg.grid.y_max();
  jg["nx"] = cfg.grid.nx;
  jg["ny"] = cfg.grid.ny;
  jg["spacing_x_m"] = cfg.grid.dx;
  jg["spacing_y_m"] = cfg.grid.dy;
  root["grid"] = jg;

  const auto solver = [](const SolverConfig& c) {
    json j;
    j["max_sparsity"] = c.max_sparsity;
    j["residual_tol"] = c.residual_tol;
    j["noise_variance"] = c.noise_variance;
    j["l1_weight"] = c.l1_weight;
    j["max_iters"] = c.max_iters;
    j["rvm_beta_prune"] = c.rvm_beta_prune;
    j["rvm_fixed_beta"] = c.rvm_fixed_beta;
    j["debias"] = c.debias;
    j["prune_gate"] = c.prune_gate;
    j["ridge_lambda"] = c.ridge_lambda;
    return j;
  };
  root["solvers"]["greedy"] = solver(cfg.experiment.greedy);
  root["solvers"]["bcs"] = solver(cfg.experiment.bcs);

  json je;
  je["snr_db"] = cfg.experiment.snr_db;
  je["n_trials"] = cfg.experiment.n_trials;
  je["snr_reference_gain_db"] = cfg.experiment.snr_reference_gain_db;
  je["use_estimated_sync"] = cfg.experiment.use_estimated_sync;
  je["amplitude_fading"] = cfg.experiment.amplitude_fading;
  je["anchor_isolation_m"] = cfg.experiment.anchor_isolation_m;
  je["anchor_count"] = cfg.experiment.anchor_count;
  je["schemes"] = json::array();
  for (Scheme s : cfg.experiment.schemes) {
    je["schemes"].push_back(scheme_name(s));
  }
  root["experiment"] = je;

  root["ptrf"]["target_m"] = {cfg.ptrf.target.x(), cfg.ptrf.target.y(),
                              cfg.ptrf.target.z()};

  json jb;
  jb["range_sigma_m"] = cfg.bounds.noise.range_sigma_m;
  jb["azimuth_sigma_deg"] = cfg.bounds.noise.azimuth_sigma_rad * 180.0 / kPi;
  jb["elevation_sigma_deg"] =
      cfg.bounds.noise.elevation_sigma_rad * 180.0 / kPi;
  jb["raw_variance"] = cfg.bounds.noise.raw_variance;
  jb["pcf_derived_from_raw"] = cfg.bounds.noise.pcf_derived_from_raw;
  jb["pcf_inflation"] = cfg.bounds.noise.pcf_inflation;
  jb["prior_sigma_m"] = cfg.bounds.prior_sigma_m;
  jb["n_mc"] = cfg.bounds.n_mc;
  root["bounds"] = jb;

  const char* scen = "medium_range_5tgt";
  if (cfg.scenario == ScenarioKind::close_pair) scen = "close_pair";
  if (cfg.scenario == ScenarioKind::near_range_grid) scen = "near_range_grid";
  root["image"]["scenario"] = scen;
  return root;
}

}  // namespace detail

// Parses and validates a configuration document. Unknown keys are ignored;
// missing keys fall back to the documented defaults; every violated field is
// reported in a single ConfigError.
inline RunConfig parse_config(const nlohmann::json& root) {
  if (!root.is_object()) {
    throw ConfigError("invalid configuration:\n  root: must be an object");
  }
  detail::ConfigErrors errs;
  RunConfig cfg;

  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned() &&
        !root.at("seed").is_number_integer()) {
      errs.add("seed", "must be a non-negative integer");
    } else if (root.at("seed").is_number_integer() &&
               root.at("seed").get<std::int64_t>() < 0) {
      errs.add("seed", "must be a non-negative integer");
    } else {
      cfg.seed = root.at("seed").get<std::uint64_t>();
    }
  }
  cfg.threads = detail::get_int(root, "", "threads", cfg.threads, errs);
  if (cfg.threads < 1) errs.add("threads", "must be >= 1");

  cfg.scene = detail::parse_scene(root, errs);
  cfg.grid = detail::parse_grid(root, errs);

  cfg.experiment.scene = cfg.scene;
  cfg.experiment.grid = cfg.grid;
  cfg.experiment.seed = cfg.seed;
  cfg.experiment.threads = cfg.threads;
  cfg.experiment.greedy =
      detail::parse_solver(root, "greedy", cfg.experiment.greedy, errs);
  cfg.experiment.bcs =
      detail::parse_solver(root, "bcs", cfg.experiment.bcs, errs);
  detail::parse_experiment(root, cfg, errs);

  if (root.contains("ptrf") && root.at("ptrf").is_object()) {
    cfg.ptrf.target_set = root.at("ptrf").contains("target_m");
    cfg.ptrf.target = detail::get_vec3(root.at("ptrf"), "ptrf", "target_m",
                                       cfg.ptrf.target, errs);
  }
  detail::parse_bounds(root, cfg.bounds, errs);
  if (root.contains("image") && root.at("image").is_object() &&
      root.at("image").contains("scenario")) {
    const nlohmann::json& s = root.at("image").at("scenario");
    if (!s.is_string()) {
      errs.add("image.scenario", "must be a string");
    } else {
      cfg.scenario =
          detail::parse_scenario(s.get<std::string>(), "image.scenario", errs);
    }
  }

  errs.raise_if_any();
  cfg.resolved = detail::resolve_config(cfg);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(root);
}

}  // namespace dsr
