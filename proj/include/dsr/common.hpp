#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace dsr {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Propagation speed used throughout (radar convention).
inline constexpr double kSpeedOfLight = 3.0e8;
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Library version recorded in run manifests.
inline constexpr const char* kVersionString = "1.0.0";

// Error categories thrown by the library. All derive from std::runtime_error
// except configuration/dimension problems, which use std::invalid_argument.
struct DegenerateGeometryError : std::runtime_error {
  explicit DegenerateGeometryError(const std::string& what)
      : std::runtime_error(what) {}
};

struct ConditioningError : std::runtime_error {
  explicit ConditioningError(const std::string& what)
      : std::runtime_error(what) {}
};

struct ObservabilityError : std::runtime_error {
  explicit ObservabilityError(const std::string& what)
      : std::runtime_error(what) {}
};

struct NoAnchorError : std::runtime_error {
  explicit NoAnchorError(const std::string& what) : std::runtime_error(what) {}
};

struct UndefinedMetricError : std::runtime_error {
  explicit UndefinedMetricError(const std::string& what)
      : std::runtime_error(what) {}
};

struct MemoryBudgetError : std::runtime_error {
  explicit MemoryBudgetError(const std::string& what)
      : std::runtime_error(what) {}
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Counter-keyed random stream. Streams derived from (seed, k0..k3) are
// independent of evaluation order and thread schedule, so any consumer that
// keys one stream per logical unit of work is reproducible by construction.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t seed, std::uint64_t k0 = 0,
                     std::uint64_t k1 = 0, std::uint64_t k2 = 0,
                     std::uint64_t k3 = 0) {
    state_ = seed ^ 0xD1B54A32D192ED03ULL;
    absorb(k0);
    absorb(k1);
    absorb(k2);
    absorb(k3);
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform on (0, 1].
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
  }

  // Standard normal via Box-Muller; generates pairs and caches the second.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(kTwoPi * u2);
    have_cached_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  // Circular complex normal with total variance `variance`.
  cplx cnormal(double variance) {
    const double s = std::sqrt(0.5 * variance);
    const double re = s * normal();
    const double im = s * normal();
    return {re, im};
  }

 private:
  void absorb(std::uint64_t k) {
    state_ ^= k + 0x9E3779B97F4A7C15ULL + (state_ << 6) + (state_ >> 2);
    (void)detail::splitmix64(state_);
  }

  std::uint64_t state_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Runs fn(i) for i in [0, n). Work items must be independent and write to
// disjoint locations; results are then identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t t_count =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    pool.emplace_back([t, t_count, n, &fn] {
      for (std::size_t i = t; i < n; i += t_count) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Inverse of a symmetric positive (semi)definite matrix via eigendecomposition
// with a relative eigenvalue floor. Throws ConditioningError when the matrix
// is singular at the floor.
inline RMat invert_spd(const RMat& m, double rel_floor = 1e-12) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("invert_spd: matrix must be square");
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) {
    throw ConditioningError("invert_spd: eigendecomposition failed");
  }
  const RVec& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  if (!(emax > 0.0) || !std::isfinite(emax)) {
    throw ConditioningError("invert_spd: matrix has no positive spectrum");
  }
  const double floor = rel_floor * emax;
  RVec inv_ev(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < floor) {
      throw ConditioningError(
          "invert_spd: eigenvalue below relative floor (ratio " +
          std::to_string(ev[i] / emax) + ")");
    }
    inv_ev[i] = 1.0 / ev[i];
  }
  return es.eigenvectors() * inv_ev.asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace dsr
