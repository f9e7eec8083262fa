#pragma once

// Sparse image-formation solvers: orthogonal matching pursuit (plain and
// block-structured), l1-regularized MAP imaging via monotone proximal
// gradient, and a complex-valued relevance vector machine (Bayesian
// compressed sensing), plus the normalized-MSE metric used to score
// reconstructions. All solvers work through the matrix-free LinearOperator
// interface and are deterministic.

#include "dsr/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsr {

// Result of a sparse solve. `coefficients` always has the dictionary's full
// column count with entries outside the detected support exactly zero.
// `support` holds selected column indices for omp / l1_map / bcs_rvm and
// selected cell indices for block_omp, sorted ascending.
struct SparseImage {
  CVec coefficients;
  std::vector<int> support;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
  // Filled by l1_map only: MAP objective after each proximal step.
  std::vector<double> objective_trace;
};

struct RvmHyper {
  double a1 = 1e-6;
  double b1 = 1e-6;
  double a2 = 1e-6;
  double b2 = 1e-6;
};

struct SolverConfig {
  // Greedy methods stop after this many selections (columns or cells).
  int max_sparsity = 8;
  // Greedy residual stopping norm. Negative = auto: 1.1 * sqrt(rows *
  // noise_variance), the expected noise-floor norm with a 10% guard. For
  // bcs_rvm this is the max relative precision change declaring convergence
  // (auto = 1e-6).
  double residual_tol = -1.0;
  // Per-sample complex noise variance; feeds the residual_tol / l1_weight
  // defaults. Also the frozen sigma^2 in rvm_fixed_beta mode.
  double noise_variance = 0.0;
  // l1 penalty weight mu. Negative = auto: sigma * sqrt(2 log cols), the
  // universal threshold; requires noise_variance > 0 in that case.
  double l1_weight = -1.0;
  RvmHyper rvm_hyper;
  int max_iters = 1000;
  // Active cells whose precision exceeds rvm_beta_prune times the smallest
  // active precision are pruned (ratio form keeps the rule data-scale-free);
  // 1e4 discards cells whose posterior power sits 40 dB below the most
  // relevant cell, comfortably past the gamma-prior ceiling irrelevant cells
  // settle at.
  double rvm_beta_prune = 1e4;
  // When >= 0, bcs_rvm freezes all precisions at this value and sigma^2 at
  // noise_variance (no updates, no pruning): exact ridge regression.
  double rvm_fixed_beta = -1.0;
  // Re-fit coefficients by least squares on the detected support (l1_map,
  // bcs_rvm; greedy methods refit by construction).
  bool debias = true;
  // Greedy backtracking: after the pursuit loop, drop selections whose
  // coefficient magnitude (block norm in block_omp) falls below prune_gate
  // times the strongest selection, then re-fit once. 0 disables. Cleans up
  // low-energy picks the residual-driven loop made on the way down.
  double prune_gate = 0.0;
  // Ridge weight for the greedy refits: 0 = plain least squares, negative =
  // use noise_variance (the MAP weight under a unit-power coefficient
  // prior). Shrinkage tempers coefficient splitting across correlated picks
  // when the data is noisy.
  double ridge_lambda = 0.0;
  // Budget for the dense Gram/column workspace inside bcs_rvm.
  std::size_t memory_budget_bytes = std::size_t(1) << 28;
};

namespace detail {

inline void validate_solver_config(const SolverConfig& config,
                                   std::ptrdiff_t selectable) {
  if (config.max_sparsity < 1) {
    throw std::invalid_argument("SolverConfig: max_sparsity must be >= 1");
  }
  if (config.max_sparsity > selectable) {
    throw std::invalid_argument(
        "SolverConfig: max_sparsity " + std::to_string(config.max_sparsity) +
        " exceeds the " + std::to_string(selectable) + " selectable atoms");
  }
  if (config.noise_variance < 0.0) {
    throw std::invalid_argument("SolverConfig: noise_variance must be >= 0");
  }
  if (config.max_iters < 1) {
    throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
  }
  if (config.prune_gate < 0.0 || config.prune_gate >= 1.0) {
    throw std::invalid_argument(
        "SolverConfig: prune_gate must lie in [0, 1)");
  }
}

inline double greedy_tol(const SolverConfig& config, std::ptrdiff_t rows) {
  if (config.residual_tol >= 0.0) return config.residual_tol;
  return 1.1 * std::sqrt(static_cast<double>(rows) * config.noise_variance);
}

// Scatter per-support least-squares coefficients into a full-length vector.
inline CVec scatter(const CVec& dense, const std::vector<int>& cols,
                    std::ptrdiff_t n) {
  CVec full = CVec::Zero(n);
  for (std::size_t i = 0; i < cols.size(); ++i) full[cols[i]] = dense[i];
  return full;
}

// Least-squares (or ridge, per config) coefficients of data on A's columns.
inline CVec greedy_refit(const CMat& A, const CVec& data,
                         const SolverConfig& config) {
  const double lambda = config.ridge_lambda < 0.0 ? config.noise_variance
                                                  : config.ridge_lambda;
  if (lambda <= 0.0) {
    return A.colPivHouseholderQr().solve(data);
  }
  CMat gram = A.adjoint() * A;
  gram.diagonal().array() += lambda;
  return gram.ldlt().solve(A.adjoint() * data);
}

}  // namespace detail

// Greedy column pursuit: each iteration selects the column with the largest
// unit-normalized |correlation| against the residual (ties -> lowest index),
// then re-fits all selected columns by least squares. Stops at max_sparsity
// selections or when the residual norm reaches the tolerance; if the
// tolerance is not reached the best iterate is returned with converged =
// false.
inline SparseImage omp(const LinearOperator& H, const CVec& data,
                       const SolverConfig& config = {}) {
  const std::ptrdiff_t rows = H.rows();
  const std::ptrdiff_t cols = H.cols();
  detail::validate_solver_config(config, cols);
  if (data.size() != rows) {
    throw std::invalid_argument("omp: data length does not match rows");
  }

  SparseImage out;
  out.coefficients = CVec::Zero(cols);
  const double data_norm = data.norm();
  const double tol = std::max(detail::greedy_tol(config, rows),
                              1e-10 * data_norm);
  out.residual_norm = data_norm;
  if (data_norm == 0.0) return out;

  const RVec norms = H.column_norms();
  CVec residual = data;
  CMat selected_cols(rows, 0);
  std::vector<int> selected;
  std::vector<char> used(static_cast<std::size_t>(cols), 0);
  CVec fit;
  const auto refit = [&](const CMat& A) {
    return detail::greedy_refit(A, data, config);
  };

  while (out.iterations < config.max_sparsity) {
    const CVec corr = H.adjoint(residual);
    double best = 0.0;
    int best_j = -1;
    for (std::ptrdiff_t j = 0; j < cols; ++j) {
      if (used[static_cast<std::size_t>(j)] || norms[j] == 0.0) continue;
      const double score = std::abs(corr[j]) / norms[j];
      if (score > best) {
        best = score;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j < 0 || best <= 1e-12 * data_norm) break;

    used[static_cast<std::size_t>(best_j)] = 1;
    selected.push_back(best_j);
    selected_cols.conservativeResize(Eigen::NoChange, selected_cols.cols() + 1);
    selected_cols.col(selected_cols.cols() - 1) = H.column(best_j);
    fit = refit(selected_cols);
    residual = data - selected_cols * fit;
    ++out.iterations;
    out.residual_norm = residual.norm();
    if (out.residual_norm <= tol) break;
  }

  if (config.prune_gate > 0.0 && !selected.empty()) {
    double top = 0.0;
    for (std::ptrdiff_t i = 0; i < fit.size(); ++i) {
      top = std::max(top, std::abs(fit[i]));
    }
    std::vector<std::ptrdiff_t> keep;
    for (std::ptrdiff_t i = 0; i < fit.size(); ++i) {
      if (std::abs(fit[i]) >= config.prune_gate * top) keep.push_back(i);
    }
    if (keep.size() < selected.size()) {
      CMat kept(rows, static_cast<std::ptrdiff_t>(keep.size()));
      std::vector<int> kept_sel;
      for (std::size_t k = 0; k < keep.size(); ++k) {
        kept.col(static_cast<std::ptrdiff_t>(k)) =
            selected_cols.col(keep[k]);
        kept_sel.push_back(selected[static_cast<std::size_t>(keep[k])]);
      }
      fit = refit(kept);
      out.residual_norm = (data - kept * fit).norm();
      selected = std::move(kept_sel);
    }
  }

  out.converged = out.residual_norm <= tol;
  out.coefficients = detail::scatter(fit, selected, cols);
  out.support = selected;
  std::sort(out.support.begin(), out.support.end());
  return out;
}

// Block-OMP over cell-major blocks: column l*n_sensors + q belongs to cell l.
// Each iteration scores every cell by the sum over sensors of normalized
// projection energies (for the uncompressed block dictionary the per-sensor
// columns of one cell occupy disjoint rows, so this is exactly the residual
// energy a block projection removes), selects the best cell, and jointly
// re-fits all columns of all selected cells. `support` holds cell indices.
inline SparseImage block_omp(const LinearOperator& H, int n_cells,
                             int n_sensors, const CVec& data,
                             const SolverConfig& config = {}) {
  const std::ptrdiff_t rows = H.rows();
  const std::ptrdiff_t cols = H.cols();
  if (n_cells < 1 || n_sensors < 1 ||
      cols != static_cast<std::ptrdiff_t>(n_cells) * n_sensors) {
    throw std::invalid_argument(
        "block_omp: columns must equal n_cells * n_sensors");
  }
  detail::validate_solver_config(config, n_cells);
  if (data.size() != rows) {
    throw std::invalid_argument("block_omp: data length does not match rows");
  }

  SparseImage out;
  out.coefficients = CVec::Zero(cols);
  const double data_norm = data.norm();
  const double tol = std::max(detail::greedy_tol(config, rows),
                              1e-10 * data_norm);
  out.residual_norm = data_norm;
  if (data_norm == 0.0) return out;

  const RVec norms = H.column_norms();
  CVec residual = data;
  CMat selected_cols(rows, 0);
  std::vector<int> cells;         // selection order
  std::vector<int> col_indices;   // matching column order inside selected_cols
  std::vector<char> used(static_cast<std::size_t>(n_cells), 0);
  CVec fit;
  const auto refit = [&](const CMat& A) {
    return detail::greedy_refit(A, data, config);
  };

  while (out.iterations < config.max_sparsity) {
    const CVec corr = H.adjoint(residual);
    double best = 0.0;
    int best_l = -1;
    for (int l = 0; l < n_cells; ++l) {
      if (used[static_cast<std::size_t>(l)]) continue;
      double energy = 0.0;
      for (int q = 0; q < n_sensors; ++q) {
        const std::ptrdiff_t j =
            static_cast<std::ptrdiff_t>(l) * n_sensors + q;
        if (norms[j] == 0.0) continue;
        const double c = std::abs(corr[j]) / norms[j];
        energy += c * c;
      }
      if (energy > best) {
        best = energy;
        best_l = l;
      }
    }
    if (best_l < 0 || best <= 1e-24 * data_norm * data_norm) break;

    used[static_cast<std::size_t>(best_l)] = 1;
    cells.push_back(best_l);
    for (int q = 0; q < n_sensors; ++q) {
      const std::ptrdiff_t j =
          static_cast<std::ptrdiff_t>(best_l) * n_sensors + q;
      col_indices.push_back(static_cast<int>(j));
      selected_cols.conservativeResize(Eigen::NoChange,
                                       selected_cols.cols() + 1);
      selected_cols.col(selected_cols.cols() - 1) = H.column(j);
    }
    fit = refit(selected_cols);
    residual = data - selected_cols * fit;
    ++out.iterations;
    out.residual_norm = residual.norm();
    if (out.residual_norm <= tol) break;
  }

  if (config.prune_gate > 0.0 && !cells.empty()) {
    double top = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      top = std::max(
          top, fit.segment(static_cast<std::ptrdiff_t>(i) * n_sensors,
                           n_sensors)
                   .norm());
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double mag =
          fit.segment(static_cast<std::ptrdiff_t>(i) * n_sensors, n_sensors)
              .norm();
      if (mag >= config.prune_gate * top) keep.push_back(i);
    }
    if (keep.size() < cells.size()) {
      CMat kept(rows,
                static_cast<std::ptrdiff_t>(keep.size()) * n_sensors);
      std::vector<int> kept_cells, kept_cols;
      for (std::size_t k = 0; k < keep.size(); ++k) {
        kept_cells.push_back(cells[keep[k]]);
        for (int q = 0; q < n_sensors; ++q) {
          const std::size_t src = keep[k] * static_cast<std::size_t>(
                                                n_sensors) +
                                  static_cast<std::size_t>(q);
          kept.col(static_cast<std::ptrdiff_t>(k) * n_sensors + q) =
              selected_cols.col(static_cast<std::ptrdiff_t>(src));
          kept_cols.push_back(col_indices[src]);
        }
      }
      fit = refit(kept);
      out.residual_norm = (data - kept * fit).norm();
      cells = std::move(kept_cells);
      col_indices = std::move(kept_cols);
    }
  }

  out.converged = out.residual_norm <= tol;
  out.coefficients = detail::scatter(fit, col_indices, cols);
  out.support = cells;
  std::sort(out.support.begin(), out.support.end());
  return out;
}

inline SparseImage block_omp(const BlockDictionary& H, const CVec& data,
                             const SolverConfig& config = {}) {
  return block_omp(H, static_cast<int>(H.n_cells()),
                   static_cast<int>(H.n_sensors()), data, config);
}

namespace detail {

// Largest eigenvalue of H^H H by power iteration (deterministic start).
inline double operator_norm_sq(const LinearOperator& H) {
  const std::ptrdiff_t cols = H.cols();
  StreamRng rng(0x50F7C0DEull, 0x11u);
  CVec v(cols);
  for (std::ptrdiff_t j = 0; j < cols; ++j) {
    v[j] = cplx(rng.normal(), rng.normal());
  }
  double nv = v.norm();
  if (nv == 0.0) return 0.0;
  v /= nv;
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    CVec w = H.adjoint(H.apply(v));
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double next = nw;  // ||H^H H v|| with unit v
    w /= nw;
    const bool settled = std::abs(next - lambda) <= 1e-6 * next;
    lambda = next;
    v.swap(w);
    if (settled && it >= 4) break;
  }
  return lambda;
}

// MAP objective ||Hb - r||^2 + mu * ||b||_1.
inline double l1_objective(const LinearOperator& H, const CVec& data,
                           const CVec& b, double mu) {
  return (H.apply(b) - data).squaredNorm() + mu * b.lpNorm<1>();
}

}  // namespace detail

// l1-regularized MAP imaging: minimizes ||Hb - r||^2 + mu ||b||_1 by
// proximal gradient (complex soft-thresholding) with step 1 / (2 ||H||^2)
// from power iteration and a halving backtrack that keeps the objective
// non-increasing. The detected support is the exact nonzero set of the final
// iterate; with debias enabled the returned coefficients are the
// least-squares refit on that support. Hitting max_iters without meeting the
// stopping rule flags the result (converged = false).
inline SparseImage l1_map(const LinearOperator& H, const CVec& data,
                          const SolverConfig& config = {}) {
  const std::ptrdiff_t rows = H.rows();
  const std::ptrdiff_t cols = H.cols();
  detail::validate_solver_config(config, cols);
  if (data.size() != rows) {
    throw std::invalid_argument("l1_map: data length does not match rows");
  }
  double mu = config.l1_weight;
  if (mu < 0.0) {
    if (config.noise_variance <= 0.0) {
      throw std::invalid_argument(
          "l1_map: automatic l1_weight requires noise_variance > 0");
    }
    mu = std::sqrt(config.noise_variance *
                   2.0 * std::log(static_cast<double>(cols)));
  }
  if (mu <= 0.0) {
    throw std::invalid_argument("l1_map: l1_weight must be positive");
  }

  SparseImage out;
  out.coefficients = CVec::Zero(cols);
  out.residual_norm = data.norm();
  if (out.residual_norm == 0.0) return out;

  const double lip = 2.0 * detail::operator_norm_sq(H);
  if (lip == 0.0) return out;
  const double base_step = 1.0 / lip;

  CVec b = CVec::Zero(cols);
  double objective = detail::l1_objective(H, data, b, mu);
  out.objective_trace.reserve(static_cast<std::size_t>(config.max_iters));
  bool reached_stop = false;
  for (int it = 0; it < config.max_iters; ++it) {
    const CVec grad = 2.0 * H.adjoint(H.apply(b) - data);
    double step = base_step;
    CVec candidate;
    double cand_obj = objective;
    for (int half = 0; half < 40; ++half) {
      candidate = b - step * grad;
      for (std::ptrdiff_t j = 0; j < cols; ++j) {
        const double mag = std::abs(candidate[j]);
        const double keep = mag - step * mu;
        candidate[j] = keep > 0.0 ? candidate[j] * (keep / mag) : cplx(0.0);
      }
      cand_obj = detail::l1_objective(H, data, candidate, mu);
      if (cand_obj <= objective * (1.0 + 1e-15)) break;
      step *= 0.5;
    }
    const double delta = (b - candidate).lpNorm<Eigen::Infinity>();
    b.swap(candidate);
    objective = std::min(cand_obj, objective);
    out.objective_trace.push_back(objective);
    ++out.iterations;
    if (delta <= 1e-12 * std::max(1.0, b.lpNorm<Eigen::Infinity>())) {
      reached_stop = true;
      break;
    }
  }
  out.converged = reached_stop;

  std::vector<int> support;
  for (std::ptrdiff_t j = 0; j < cols; ++j) {
    if (b[j] != cplx(0.0)) support.push_back(static_cast<int>(j));
  }
  out.support = support;
  out.coefficients = b;
  if (config.debias && !support.empty() &&
      static_cast<std::ptrdiff_t>(support.size()) <= rows) {
    CMat A(rows, static_cast<std::ptrdiff_t>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i) {
      A.col(static_cast<std::ptrdiff_t>(i)) = H.column(support[i]);
    }
    const CVec fit = A.colPivHouseholderQr().solve(data);
    out.coefficients = detail::scatter(fit, support, cols);
  }
  out.residual_norm = (data - H.apply(out.coefficients)).norm();
  return out;
}

// Bayesian compressed sensing via a complex-valued relevance vector machine.
struct RvmResult {
  SparseImage image;
  double noise_variance = 0.0;
  // Extrema of gamma_i = 1 - beta_i * Sigma_ii over every update sweep;
  // well-posed updates keep them inside [0, 1].
  double gamma_min = 1.0;
  double gamma_max = 0.0;
};

// Evidence-style iterations on complex Gaussians: posterior covariance
// Sigma = (sigma^-2 H^H H + diag(beta))^-1 and mean mu = sigma^-2 Sigma H^H r
// over the active set, then beta_i <- (gamma_i + 2 a1) / (|mu_i|^2 + 2 b1)
// and sigma^2 <- (||r - H mu||^2 + 2 b2) / (rows - sum gamma + 2 a2), with
// cells whose precision explodes (relative to the smallest active precision)
// pruned from the active set. Stops when the largest relative beta change
// drops below the tolerance. A posterior factorization that stays
// non-positive-definite after jitter retries flags the result.
inline RvmResult bcs_rvm(const LinearOperator& H, const CVec& data,
                         const SolverConfig& config = {}) {
  const std::ptrdiff_t rows = H.rows();
  const std::ptrdiff_t cols = H.cols();
  detail::validate_solver_config(config, cols);
  if (data.size() != rows) {
    throw std::invalid_argument("bcs_rvm: data length does not match rows");
  }

  RvmResult res;
  res.image.coefficients = CVec::Zero(cols);
  res.image.residual_norm = data.norm();
  if (res.image.residual_norm == 0.0) {
    res.gamma_min = 0.0;
    res.gamma_max = 0.0;
    return res;
  }

  // The gamma hyperpriors are absolute numbers, so the update dynamics (and
  // the relative prune rule) run on data rescaled to unit per-sample power;
  // outputs are scaled back at the end. Fixed-beta mode is exact ridge
  // regression in the caller's units and is left untouched.
  const bool fixed_mode = config.rvm_fixed_beta >= 0.0;
  const double scale =
      fixed_mode ? 1.0
                 : std::sqrt(static_cast<double>(rows)) / res.image.residual_norm;
  const double data_norm_sq = data.squaredNorm() * scale * scale;

  const std::size_t gram_bytes =
      static_cast<std::size_t>(cols) * static_cast<std::size_t>(cols) *
          sizeof(cplx) +
      static_cast<std::size_t>(rows) * sizeof(cplx);
  if (gram_bytes > config.memory_budget_bytes) {
    throw MemoryBudgetError(
        "bcs_rvm: Gram workspace for " + std::to_string(cols) +
        " columns needs " + std::to_string(gram_bytes) +
        " bytes, over the budget of " +
        std::to_string(config.memory_budget_bytes) + " bytes");
  }

  // Gram and correlation on the full column set, computed once; pruning then
  // only ever selects sub-blocks. A temporary column bank turns the Gram into
  // one matrix product when the budget allows it.
  CMat gram(cols, cols);
  CVec hr(cols);
  {
    const std::size_t bank_bytes =
        static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows) *
        sizeof(cplx);
    if (bank_bytes + gram_bytes <= config.memory_budget_bytes) {
      CMat bank(rows, cols);
      for (std::ptrdiff_t j = 0; j < cols; ++j) bank.col(j) = H.column(j);
      gram.noalias() = bank.adjoint() * bank;
      hr.noalias() = bank.adjoint() * data;
    } else {
      CVec col_j(rows);
      CVec col_i(rows);
      for (std::ptrdiff_t j = 0; j < cols; ++j) {
        col_j = H.column(j);
        hr[j] = col_j.dot(data);
        for (std::ptrdiff_t i = j; i < cols; ++i) {
          col_i = H.column(i);
          gram(i, j) = col_i.dot(col_j);
          gram(j, i) = std::conj(gram(i, j));
        }
      }
    }
  }
  hr *= scale;

  double sigma_sq = fixed_mode ? config.noise_variance
                               : 0.01 * data_norm_sq /
                                     static_cast<double>(rows);
  if (sigma_sq <= 0.0) sigma_sq = 1e-12 * data_norm_sq;

  std::vector<int> active(static_cast<std::size_t>(cols));
  for (std::ptrdiff_t j = 0; j < cols; ++j) active[j] = static_cast<int>(j);
  RVec beta(cols);
  if (fixed_mode) {
    beta.setConstant(config.rvm_fixed_beta);
  } else {
    beta.setConstant(static_cast<double>(rows) / data_norm_sq);
  }

  const double tol = config.residual_tol >= 0.0 ? config.residual_tol : 1e-6;
  CVec mu;
  RVec sigma_diag;
  bool converged = false;
  bool flagged_failure = false;
  int sweeps = 0;

  auto active_posterior = [&](CVec& mu_out, RVec& diag_out,
                              CMat* cov_out) -> bool {
    const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(active.size());
    CMat prec(a, a);
    for (std::ptrdiff_t i = 0; i < a; ++i) {
      for (std::ptrdiff_t j = 0; j < a; ++j) {
        prec(i, j) = gram(active[i], active[j]) / sigma_sq;
      }
      prec(i, i) += beta[active[i]];
    }
    double jitter = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      CMat trial = prec;
      if (jitter > 0.0) {
        for (std::ptrdiff_t i = 0; i < a; ++i) trial(i, i) += jitter;
      }
      Eigen::LLT<CMat> llt(trial);
      if (llt.info() == Eigen::Success) {
        CMat cov = llt.solve(CMat::Identity(a, a));
        CVec rhs(a);
        for (std::ptrdiff_t i = 0; i < a; ++i) rhs[i] = hr[active[i]];
        mu_out = cov * rhs / sigma_sq;
        diag_out = cov.diagonal().real();
        if (cov_out != nullptr) *cov_out = std::move(cov);
        return true;
      }
      jitter = (jitter == 0.0)
                   ? 1e-12 * prec.diagonal().real().mean()
                   : jitter * 100.0;
    }
    return false;
  };

  for (int it = 0; it < config.max_iters; ++it) {
    if (!active_posterior(mu, sigma_diag, nullptr)) {
      flagged_failure = true;
      break;
    }
    ++sweeps;

    const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(active.size());
    double gamma_sum = 0.0;
    RVec gamma(a);
    for (std::ptrdiff_t i = 0; i < a; ++i) {
      gamma[i] = 1.0 - beta[active[i]] * sigma_diag[i];
      gamma_sum += gamma[i];
      res.gamma_min = std::min(res.gamma_min, gamma[i]);
      res.gamma_max = std::max(res.gamma_max, gamma[i]);
    }
    if (fixed_mode) {
      converged = true;
      break;
    }

    double max_rel_change = 0.0;
    for (std::ptrdiff_t i = 0; i < a; ++i) {
      const int j = active[i];
      const double numer = std::max(gamma[i], 0.0) + 2.0 * config.rvm_hyper.a1;
      const double denom = std::norm(mu[i]) + 2.0 * config.rvm_hyper.b1;
      const double next = numer / denom;
      max_rel_change =
          std::max(max_rel_change, std::abs(next - beta[j]) /
                                       std::max(beta[j], 1e-300));
      beta[j] = next;
    }

    // ||r - H mu||^2 expanded through the Gram so no row-space work is
    // needed: ||r||^2 - 2 Re(mu^H hr) + mu^H G mu.
    CVec rhs(a);
    CMat g_aa(a, a);
    for (std::ptrdiff_t i = 0; i < a; ++i) {
      rhs[i] = hr[active[i]];
      for (std::ptrdiff_t j2 = 0; j2 < a; ++j2) {
        g_aa(i, j2) = gram(active[i], active[j2]);
      }
    }
    const double fit_sq = std::max(
        data_norm_sq - 2.0 * (mu.dot(rhs)).real() +
            (mu.adjoint() * g_aa * mu).value().real(),
        0.0);
    const double denom = std::max(static_cast<double>(rows) - gamma_sum, 0.0) +
                         2.0 * config.rvm_hyper.a2;
    sigma_sq = (fit_sq + 2.0 * config.rvm_hyper.b2) / denom;
    if (sigma_sq <= 0.0 || !std::isfinite(sigma_sq)) {
      sigma_sq = 1e-12 * data_norm_sq;
    }

    // Prune cells whose precision ran away relative to the most relevant one.
    double beta_min = std::numeric_limits<double>::infinity();
    for (int j : active) beta_min = std::min(beta_min, beta[j]);
    std::vector<int> survivors;
    survivors.reserve(active.size());
    for (int j : active) {
      if (beta[j] <= config.rvm_beta_prune * beta_min) survivors.push_back(j);
    }
    if (survivors.empty()) survivors.push_back(active.front());
    active.swap(survivors);

    if (max_rel_change < tol) {
      converged = true;
      break;
    }
  }

  // Pruning may have shrunk the active set after mu was computed; redo the
  // posterior on the final set so the returned mean matches it.
  if (!flagged_failure && !fixed_mode) {
    if (!active_posterior(mu, sigma_diag, nullptr)) flagged_failure = true;
  }

  res.noise_variance = sigma_sq / (scale * scale);
  res.image.iterations = sweeps;
  res.image.converged = converged && !flagged_failure;
  res.image.support = active;
  std::sort(res.image.support.begin(), res.image.support.end());

  if (flagged_failure || mu.size() == 0) {
    res.image.coefficients = CVec::Zero(cols);
  } else if (config.debias &&
             static_cast<std::ptrdiff_t>(active.size()) <= rows) {
    CMat A(rows, static_cast<std::ptrdiff_t>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) {
      A.col(static_cast<std::ptrdiff_t>(i)) = H.column(active[i]);
    }
    const CVec fit = A.colPivHouseholderQr().solve(data);
    res.image.coefficients = detail::scatter(fit, active, cols);
  } else {
    // Posterior mean in the caller's units, placed at the active cells.
    CVec full = CVec::Zero(cols);
    for (std::size_t i = 0; i < active.size(); ++i) {
      full[active[i]] = mu[static_cast<std::ptrdiff_t>(i)] / scale;
    }
    res.image.coefficients = full;
  }
  res.image.residual_norm = (data - H.apply(res.image.coefficients)).norm();
  return res;
}

// Normalized reconstruction errors with max-magnitude normalization:
// nmse_all = || t/|t|_max - e/|e|_max ||_2 over all cells, nmse_target the
// same difference restricted to the target rows. An all-zero estimate is
// treated as identically zero after normalization; an all-zero truth has no
// defined value.
struct NmseResult {
  double all = 0.0;
  double target = 0.0;
};

inline NmseResult nmse(const CVec& truth, const CVec& estimate,
                       const std::vector<int>& target_support) {
  if (truth.size() != estimate.size()) {
    throw std::invalid_argument("nmse: vectors must have equal length");
  }
  const double t_max = truth.cwiseAbs().maxCoeff();
  if (t_max == 0.0) {
    throw UndefinedMetricError("nmse: all-zero truth has no defined value");
  }
  const double e_max =
      estimate.size() > 0 ? estimate.cwiseAbs().maxCoeff() : 0.0;
  const CVec tn = truth / t_max;
  const CVec en = e_max > 0.0 ? CVec(estimate / e_max)
                              : CVec(CVec::Zero(estimate.size()));
  const CVec diff = tn - en;
  NmseResult out;
  out.all = diff.norm();
  double acc = 0.0;
  for (int idx : target_support) {
    if (idx < 0 || idx >= diff.size()) {
      throw std::invalid_argument("nmse: target index out of range");
    }
    acc += std::norm(diff[idx]);
  }
  out.target = std::sqrt(acc);
  return out;
}

}  // namespace dsr
