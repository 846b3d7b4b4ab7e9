#pragma once

// Weighted check-loss minimisation solved exactly as a linear program.
//
// Every problem here has the primal form
//
//   min_theta  sum_i c_i rho_{tau_i}(y_i - z_i' theta)   s.t.  G theta >= 0
//
// and is solved through its dual
//
//   max  y'a   s.t.  Z'a + G'lambda = 0,  -(1-tau_i) c_i <= a_i <= tau_i c_i,  lambda >= 0
//
// with a bounded dual simplex. The dual has one equality row per parameter, so
// a basis is P x P no matter how many observations there are; theta is read
// back from the simplex multipliers. The ratio test passes through as many
// breakpoints as the piecewise-linear dual objective allows (bound flipping),
// which is the Barrodale-Roberts long step expressed on the dual.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iar/error.hpp"

namespace iar {

using Eigen::Index;

inline double check_loss(double u, double tau) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

struct QrProblem {
  Eigen::VectorXd targets;
  Eigen::MatrixXd covariates;
  Eigen::VectorXd weights;
  double tau = 0.5;
};

/// sum_k coef_k * theta[index_k] >= 0 over the stacked parameter vector.
struct ConstraintRow {
  std::vector<std::pair<Index, double>> terms;
};

/// Stacked parameter layout: theta[q * K + k] is coefficient k of quantile q,
/// theta[Q * K + j] is auxiliary variable j (used by epigraph encodings).
struct StackedQrProblem {
  Eigen::VectorXd targets;
  Eigen::MatrixXd covariates;
  Eigen::VectorXd weights;
  std::vector<double> taus;
  Index aux_count = 0;
  std::vector<ConstraintRow> constraints;
};

/// a . beta_q >= a . beta_{q-1}
inline ConstraintRow adjacent_row(const Eigen::VectorXd& a, Index q, Index num_covariates) {
  if (q < 1) throw Error(ErrorKind::invalid_argument, "adjacent_row needs q >= 1");
  ConstraintRow row;
  for (Index k = 0; k < a.size(); ++k) {
    if (a[k] == 0.0) continue;
    row.terms.emplace_back(q * num_covariates + k, a[k]);
    row.terms.emplace_back((q - 1) * num_covariates + k, -a[k]);
  }
  return row;
}

enum class SolveStatus { optimal, degenerate_optimal };

inline const char* to_string(SolveStatus s) {
  return s == SolveStatus::optimal ? "optimal" : "degenerate-optimal";
}

struct QrSolution {
  Eigen::MatrixXd coefficients;  // Q x K; a single row for solve_weighted_qr
  Eigen::VectorXd auxiliary;
  double objective = 0.0;
  SolveStatus status = SolveStatus::optimal;
  int iterations = 0;

  Eigen::VectorXd beta(Index q = 0) const { return coefficients.row(q).transpose(); }
};

namespace detail {

struct LpResult {
  Eigen::VectorXd theta;
  bool degenerate = false;
  int iterations = 0;
};

class DualSimplex {
 public:
  explicit DualSimplex(Index num_params) : P_(num_params) { col_start_.push_back(0); }

  void reserve(std::size_t columns, std::size_t nonzeros) {
    col_start_.reserve(columns + 1);
    row_index_.reserve(nonzeros);
    values_.reserve(nonzeros);
    lower_.reserve(columns + P_);
    upper_.reserve(columns + P_);
    cost_.reserve(columns + P_);
  }

  void add_observation(const std::vector<Index>& idx, const double* val, double y, double weight,
                       double tau) {
    push_column(idx, val);
    lower_.push_back(-(1.0 - tau) * weight);
    upper_.push_back(tau * weight);
    cost_.push_back(-y);
    ++n_structural_;
  }

  void add_constraint(const ConstraintRow& row) {
    std::vector<Index> idx;
    std::vector<double> val;
    for (const auto& [i, v] : row.terms) {
      auto it = std::find(idx.begin(), idx.end(), i);
      if (it == idx.end()) {
        idx.push_back(i);
        val.push_back(v);
      } else {
        val[static_cast<std::size_t>(it - idx.begin())] += v;
      }
    }
    push_column(idx, val.data());
    lower_.push_back(0.0);
    upper_.push_back(kInf);
    cost_.push_back(0.0);
    ++n_structural_;
  }

  LpResult solve() {
    initialise();
    int iter = 0;
    int since_refactor = 0;
    int degenerate_streak = 0;
    bool bland = false;
    const int max_iter = 200 * static_cast<int>(n_total_ + P_) + 1000;
    std::vector<double> alpha(n_total_, 0.0);
    std::vector<Candidate> cands;
    std::vector<Index> flips;
    Eigen::VectorXd work(P_);
    Eigen::VectorXd col(P_);

    while (true) {
      if (since_refactor >= kRefactorEvery) {
        refactor();
        since_refactor = 0;
      }
      Index r = choose_leaving(bland);
      if (r < 0) {
        if (since_refactor == 0) break;
        refactor();
        since_refactor = 0;
        r = choose_leaving(bland);
        if (r < 0) break;
      }
      if (++iter > max_iter) throw Error(ErrorKind::internal, "simplex iteration limit reached");

      const Index leaving = basis_[r];
      const double xr = xB_[r];
      const double sigma = xr < lower_[leaving] ? 1.0 : -1.0;
      double slope = sigma > 0 ? lower_[leaving] - xr : xr - upper_[leaving];

      // Pivot row and breakpoint candidates.
      cands.clear();
      const auto rho = Binv_.row(r);
      for (Index j = 0; j < n_total_; ++j) {
        if (state_[j] == State::basic || lower_[j] == upper_[j]) {
          alpha[j] = 0.0;
          continue;
        }
        const double a = column_dot(rho, j);
        alpha[j] = a;
        const double sa = sigma * a;
        // Reduced costs within round-off of zero count as exact ties so the
        // index tie-break (and hence Bland's rule) sees them.
        const double dj = std::abs(d_[j]) <= dual_tol_ ? 0.0 : d_[j];
        if (state_[j] == State::at_lower && sa < -kPivotTol) {
          cands.push_back({std::max(dj, 0.0) / (-sa), j, std::abs(a)});
        } else if (state_[j] == State::at_upper && sa > kPivotTol) {
          cands.push_back({std::max(-dj, 0.0) / sa, j, std::abs(a)});
        }
      }
      if (cands.empty()) {
        throw Error(ErrorKind::internal, "linear program is infeasible (dual ray found)");
      }
      // Bound-flipping ratio test: breakpoints are visited in increasing order
      // (ties by index) through a heap so only the passed ones get ordered.
      const auto later = [](const Candidate& a, const Candidate& b) {
        return a.t > b.t || (a.t == b.t && a.j > b.j);
      };
      std::make_heap(cands.begin(), cands.end(), later);
      flips.clear();
      Index entering = -1;
      double step = 0.0;
      for (auto end = cands.end(); end != cands.begin(); --end) {
        std::pop_heap(cands.begin(), end, later);
        const Candidate& c = *(end - 1);
        const double range = upper_[c.j] - lower_[c.j];
        if (!std::isfinite(range) || bland) {
          entering = c.j;
          step = c.t;
          break;
        }
        slope -= c.abs_alpha * range;
        if (slope <= kSlopeTol) {
          entering = c.j;
          step = c.t;
          break;
        }
        flips.push_back(c.j);
      }
      if (entering < 0) {
        throw Error(ErrorKind::internal, "linear program is infeasible (no entering variable)");
      }

      // Dual update.
      if (step > 0.0) {
        for (Index j = 0; j < n_total_; ++j) {
          if (state_[j] != State::basic) d_[j] += step * sigma * alpha[j];
        }
      }

      // Primal update for flipped bounds.
      if (!flips.empty()) {
        work.setZero();
        for (const Index j : flips) {
          double delta;
          if (state_[j] == State::at_lower) {
            delta = upper_[j] - lower_[j];
            state_[j] = State::at_upper;
          } else {
            delta = lower_[j] - upper_[j];
            state_[j] = State::at_lower;
          }
          column_axpy(j, delta, work);
        }
        xB_.noalias() -= Binv_ * work;
      }

      // Primal pivot.
      col.setZero();
      column_axpy(entering, 1.0, col);
      const Eigen::VectorXd alpha_q = Binv_ * col;
      const double pivot = alpha_q[r];
      if (std::abs(pivot) < kPivotTol * 1e-3) {
        refactor();
        since_refactor = 0;
        continue;
      }
      const double target = sigma > 0 ? lower_[leaving] : upper_[leaving];
      const double theta_p = (xB_[r] - target) / pivot;
      const double entering_value = nonbasic_value(entering) + theta_p;
      xB_.noalias() -= theta_p * alpha_q;
      xB_[r] = entering_value;

      d_[leaving] = sigma * step;
      d_[entering] = 0.0;
      state_[leaving] = sigma > 0 ? State::at_lower : State::at_upper;
      state_[entering] = State::basic;
      basis_[r] = entering;

      // Product-form update of the explicit inverse.
      const Eigen::RowVectorXd pivot_row = Binv_.row(r) / pivot;
      for (Index i = 0; i < P_; ++i) {
        if (i == r || alpha_q[i] == 0.0) continue;
        Binv_.row(i).noalias() -= alpha_q[i] * pivot_row;
      }
      Binv_.row(r) = pivot_row;
      ++since_refactor;

      if (step <= 1e-12) {
        if (++degenerate_streak > kDegenerateLimit) bland = true;
      } else {
        degenerate_streak = 0;
        bland = false;
      }
    }

    LpResult out;
    Eigen::VectorXd cB(P_);
    for (Index i = 0; i < P_; ++i) cB[i] = cost_[basis_[i]];
    out.theta = -(Binv_.transpose() * cB);
    out.iterations = iter;
    for (Index i = 0; i < P_; ++i) {
      const Index j = basis_[i];
      if (j >= n_structural_ || xB_[i] <= lower_[j] + kFeasTol || xB_[i] >= upper_[j] - kFeasTol) {
        out.degenerate = true;
        break;
      }
    }
    return out;
  }

 private:
  enum class State : unsigned char { basic, at_lower, at_upper };

  struct Candidate {
    double t;
    Index j;
    double abs_alpha;
  };

  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr double kFeasTol = 1e-9;
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kSlopeTol = 1e-12;
  static constexpr double kDualZeroTol = 1e-11;
  static constexpr int kRefactorEvery = 100;
  static constexpr int kDegenerateLimit = 50;

  void push_column(const std::vector<Index>& idx, const double* val) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] < 0 || idx[k] >= P_) throw Error(ErrorKind::invalid_argument, "column index out of range");
      if (val[k] == 0.0) continue;
      row_index_.push_back(idx[k]);
      values_.push_back(val[k]);
    }
    col_start_.push_back(static_cast<Index>(row_index_.size()));
  }

  template <typename Row>
  double column_dot(const Row& rho, Index j) const {
    if (j >= n_structural_) return rho[j - n_structural_];
    double s = 0.0;
    for (Index p = col_start_[j]; p < col_start_[j + 1]; ++p) s += rho[row_index_[p]] * values_[p];
    return s;
  }

  void column_axpy(Index j, double scale, Eigen::VectorXd& out) const {
    if (j >= n_structural_) {
      out[j - n_structural_] += scale;
      return;
    }
    for (Index p = col_start_[j]; p < col_start_[j + 1]; ++p) out[row_index_[p]] += scale * values_[p];
  }

  double nonbasic_value(Index j) const { return state_[j] == State::at_upper ? upper_[j] : lower_[j]; }

  void initialise() {
    n_total_ = n_structural_ + P_;
    lower_.resize(n_structural_);
    upper_.resize(n_structural_);
    cost_.resize(n_structural_);
    for (Index i = 0; i < P_; ++i) {
      lower_.push_back(0.0);
      upper_.push_back(0.0);
      cost_.push_back(0.0);
    }
    state_.assign(n_total_, State::at_lower);
    d_ = cost_;
    double cmax = 0.0;
    for (const double c : cost_) cmax = std::max(cmax, std::abs(c));
    dual_tol_ = kDualZeroTol * (1.0 + cmax);
    basis_.resize(P_);
    for (Index i = 0; i < P_; ++i) {
      basis_[i] = n_structural_ + i;
      state_[n_structural_ + i] = State::basic;
    }
    // theta = 0: every observation sits at the bound matching the sign of y.
    for (Index j = 0; j < n_structural_; ++j) {
      state_[j] = (d_[j] < 0.0 && std::isfinite(upper_[j])) ? State::at_upper : State::at_lower;
    }
    Binv_ = RowMatrix::Identity(P_, P_);
    recompute_primal();
  }

  void recompute_primal() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(P_);
    for (Index j = 0; j < n_total_; ++j) {
      if (state_[j] == State::basic) continue;
      const double v = nonbasic_value(j);
      if (v != 0.0) column_axpy(j, -v, rhs);
    }
    xB_ = Binv_ * rhs;
  }

  void refactor() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(P_, P_);
    for (Index i = 0; i < P_; ++i) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(P_);
      column_axpy(basis_[i], 1.0, c);
      B.col(i) = c;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Binv_ = lu.inverse();
    Eigen::VectorXd cB(P_);
    for (Index i = 0; i < P_; ++i) cB[i] = cost_[basis_[i]];
    const Eigen::VectorXd pi = Binv_.transpose() * cB;
    for (Index j = 0; j < n_total_; ++j) {
      if (state_[j] == State::basic) {
        d_[j] = 0.0;
        continue;
      }
      d_[j] = cost_[j] - column_dot(pi, j);
      if (lower_[j] == upper_[j]) continue;
      // Keep the basis dual feasible after drift by moving to the matching bound.
      if (state_[j] == State::at_lower && d_[j] < -dual_tol_ && std::isfinite(upper_[j])) {
        state_[j] = State::at_upper;
      } else if (state_[j] == State::at_upper && d_[j] > dual_tol_) {
        state_[j] = State::at_lower;
      }
    }
    recompute_primal();
  }

  Index choose_leaving(bool bland) const {
    Index best = -1;
    double best_infeas = kFeasTol;
    for (Index i = 0; i < P_; ++i) {
      const Index j = basis_[i];
      const double infeas = std::max(lower_[j] - xB_[i], xB_[i] - upper_[j]);
      if (infeas <= kFeasTol) continue;
      if (bland) {
        if (best < 0 || j < basis_[best]) best = i;
      } else if (infeas > best_infeas || (infeas == best_infeas && best >= 0 && j < basis_[best])) {
        best = i;
        best_infeas = infeas;
      }
    }
    return best;
  }

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Index P_;
  Index n_structural_ = 0;
  Index n_total_ = 0;
  std::vector<Index> col_start_;
  std::vector<Index> row_index_;
  std::vector<double> values_;
  std::vector<double> lower_, upper_, cost_;
  std::vector<State> state_;
  std::vector<double> d_;
  double dual_tol_ = 0.0;
  std::vector<Index> basis_;
  RowMatrix Binv_;
  Eigen::VectorXd xB_;
};

/// Indices of columns that are linear combinations of others among the rows
/// with strictly positive weight; empty when the weighted design has full rank.
inline std::vector<Index> collinear_columns(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  std::vector<Index> rows;
  for (Index t = 0; t < X.rows(); ++t)
    if (w[t] > 0.0) rows.push_back(t);
  Eigen::MatrixXd Xw(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) Xw.row(static_cast<Index>(i)) = X.row(rows[i]);
  // Column scaling keeps the rank threshold meaningful for mixed-unit covariates.
  for (Index k = 0; k < Xw.cols(); ++k) {
    const double n = Xw.col(k).norm();
    if (n > 0.0) Xw.col(k) /= n;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  std::vector<Index> out;
  for (Index k = rank; k < X.cols(); ++k) out.push_back(qr.colsPermutation().indices()[k]);
  std::sort(out.begin(), out.end());
  return out;
}

inline void require_full_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  const auto bad = collinear_columns(X, w);
  if (bad.empty()) return;
  std::ostringstream msg;
  msg << "weighted design is rank deficient; collinear columns:";
  for (auto k : bad) msg << ' ' << k;
  throw Error(ErrorKind::degeneracy, msg.str());
}

inline void validate_data(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  if (X.rows() != y.size() || w.size() != y.size())
    throw Error(ErrorKind::invalid_argument, "targets, covariates and weights must have matching lengths");
  if (X.cols() < 1) throw Error(ErrorKind::invalid_argument, "at least one covariate is required");
  if (!y.allFinite() || !X.allFinite() || !w.allFinite())
    throw Error(ErrorKind::invalid_argument, "non-finite entry in quantile regression data");
  if ((w.array() < 0.0).any()) throw Error(ErrorKind::invalid_argument, "negative weight");
  if ((w.array() > 0.0).count() < X.cols())
    throw Error(ErrorKind::insufficient_data, "fewer strictly positive weights than covariates");
}

inline void validate_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::invalid_argument, "tau must lie in (0, 1)");
}

inline double weighted_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& beta, double tau) {
  const Eigen::VectorXd r = y - X * beta;
  double s = 0.0;
  for (Index t = 0; t < y.size(); ++t)
    if (w[t] > 0.0) s += w[t] * check_loss(r[t], tau);
  return s;
}

}  // namespace detail

inline QrSolution solve_weighted_qr(const QrProblem& problem) {
  const auto& y = problem.targets;
  const auto& X = problem.covariates;
  const auto& w = problem.weights;
  detail::validate_data(y, X, w);
  detail::validate_tau(problem.tau);
  detail::require_full_rank(X, w);

  const Index K = X.cols();
  const double wmax = w.maxCoeff();
  detail::DualSimplex lp(K);
  lp.reserve(static_cast<std::size_t>(y.size()), static_cast<std::size_t>(y.size() * K));
  std::vector<Index> idx(static_cast<std::size_t>(K));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::vector<double> row(static_cast<std::size_t>(K));
  for (Index t = 0; t < y.size(); ++t) {
    if (w[t] <= 0.0) continue;
    for (Index k = 0; k < K; ++k) row[static_cast<std::size_t>(k)] = X(t, k);
    lp.add_observation(idx, row.data(), y[t], w[t] / wmax, problem.tau);
  }
  const auto res = lp.solve();

  QrSolution out;
  out.coefficients = res.theta.transpose();
  out.objective = detail::weighted_loss(y, X, w, res.theta, problem.tau);
  out.status = res.degenerate ? SolveStatus::degenerate_optimal : SolveStatus::optimal;
  out.iterations = res.iterations;
  return out;
}

namespace detail {

inline void validate_taus(const std::vector<double>& taus) {
  if (taus.empty()) throw Error(ErrorKind::invalid_argument, "at least one quantile level is required");
  for (std::size_t q = 0; q < taus.size(); ++q) {
    validate_tau(taus[q]);
    if (q > 0 && !(taus[q] > taus[q - 1]))
      throw Error(ErrorKind::invalid_argument, "quantile levels must be strictly increasing");
  }
}

}  // namespace detail

/// Joint fit of several quantiles sharing one design, subject to the supplied
/// inequality rows. Without rows the problem decouples and is solved one
/// quantile at a time.
inline QrSolution solve_stacked_qr(const StackedQrProblem& problem) {
  const auto& y = problem.targets;
  const auto& X = problem.covariates;
  const auto& w = problem.weights;
  detail::validate_data(y, X, w);
  detail::validate_taus(problem.taus);
  const Index Q = static_cast<Index>(problem.taus.size());
  const Index K = X.cols();
  const Index P = Q * K + problem.aux_count;
  for (const auto& row : problem.constraints) {
    for (const auto& [i, v] : row.terms) {
      if (i < 0 || i >= P) throw Error(ErrorKind::invalid_argument, "constraint references unknown parameter");
      if (!std::isfinite(v)) throw Error(ErrorKind::invalid_argument, "non-finite constraint coefficient");
    }
  }

  QrSolution out;
  out.coefficients.resize(Q, K);
  out.auxiliary = Eigen::VectorXd::Zero(problem.aux_count);

  if (problem.constraints.empty()) {
    bool degenerate = false;
    for (Index q = 0; q < Q; ++q) {
      const auto s = solve_weighted_qr({y, X, w, problem.taus[static_cast<std::size_t>(q)]});
      out.coefficients.row(q) = s.coefficients.row(0);
      out.objective += s.objective;
      out.iterations += s.iterations;
      degenerate = degenerate || s.status == SolveStatus::degenerate_optimal;
    }
    out.status = degenerate ? SolveStatus::degenerate_optimal : SolveStatus::optimal;
    return out;
  }

  detail::require_full_rank(X, w);
  const double wmax = w.maxCoeff();
  const Index n_pos = (w.array() > 0.0).count();
  detail::DualSimplex lp(P);
  lp.reserve(static_cast<std::size_t>(n_pos * Q + static_cast<Index>(problem.constraints.size())),
             static_cast<std::size_t>(n_pos * Q * K));
  std::vector<Index> idx(static_cast<std::size_t>(K));
  std::vector<double> row(static_cast<std::size_t>(K));
  for (Index q = 0; q < Q; ++q) {
    std::iota(idx.begin(), idx.end(), q * K);
    const double tau = problem.taus[static_cast<std::size_t>(q)];
    for (Index t = 0; t < y.size(); ++t) {
      if (w[t] <= 0.0) continue;
      for (Index k = 0; k < K; ++k) row[static_cast<std::size_t>(k)] = X(t, k);
      lp.add_observation(idx, row.data(), y[t], w[t] / wmax, tau);
    }
  }
  for (const auto& c : problem.constraints) lp.add_constraint(c);
  const auto res = lp.solve();

  for (Index q = 0; q < Q; ++q) {
    out.coefficients.row(q) = res.theta.segment(q * K, K).transpose();
    out.objective += detail::weighted_loss(y, X, w, out.beta(q), problem.taus[static_cast<std::size_t>(q)]);
  }
  out.auxiliary = res.theta.tail(problem.aux_count);
  out.status = res.degenerate ? SolveStatus::degenerate_optimal : SolveStatus::optimal;
  out.iterations = res.iterations;
  return out;
}

/// Composite quantile regression: slopes shared across quantiles, one
/// intercept per quantile, intercepts nondecreasing in tau. Column 0 of the
/// covariates must be the intercept. Returns a Q x K matrix whose rows repeat
/// the shared slopes.
inline QrSolution solve_composite_qr(const Eigen::VectorXd& targets, const Eigen::MatrixXd& covariates,
                                     const Eigen::VectorXd& weights, const std::vector<double>& taus) {
  const auto& y = targets;
  const auto& X = covariates;
  const auto& w = weights;
  detail::validate_data(y, X, w);
  detail::validate_taus(taus);
  if (!(X.col(0).array() == 1.0).all())
    throw Error(ErrorKind::invalid_argument, "composite regression needs an intercept in column 0");
  detail::require_full_rank(X, w);

  const Index Q = static_cast<Index>(taus.size());
  const Index K = X.cols();
  const Index P = Q + K - 1;
  const double wmax = w.maxCoeff();
  const Index n_pos = (w.array() > 0.0).count();
  detail::DualSimplex lp(P);
  lp.reserve(static_cast<std::size_t>(n_pos * Q + Q), static_cast<std::size_t>(n_pos * Q * K));
  std::vector<Index> idx(static_cast<std::size_t>(K));
  std::vector<double> row(static_cast<std::size_t>(K));
  for (Index k = 1; k < K; ++k) idx[static_cast<std::size_t>(k)] = Q + k - 1;
  for (Index q = 0; q < Q; ++q) {
    idx[0] = q;
    for (Index t = 0; t < y.size(); ++t) {
      if (w[t] <= 0.0) continue;
      for (Index k = 0; k < K; ++k) row[static_cast<std::size_t>(k)] = X(t, k);
      lp.add_observation(idx, row.data(), y[t], w[t] / wmax, taus[static_cast<std::size_t>(q)]);
    }
  }
  for (Index q = 1; q < Q; ++q) lp.add_constraint(ConstraintRow{{{q, 1.0}, {q - 1, -1.0}}});
  const auto res = lp.solve();

  QrSolution out;
  out.coefficients.resize(Q, K);
  for (Index q = 0; q < Q; ++q) {
    out.coefficients(q, 0) = res.theta[q];
    for (Index k = 1; k < K; ++k) out.coefficients(q, k) = res.theta[Q + k - 1];
    out.objective += detail::weighted_loss(y, X, w, out.beta(q), taus[static_cast<std::size_t>(q)]);
  }
  out.status = res.degenerate ? SolveStatus::degenerate_optimal : SolveStatus::optimal;
  out.iterations = res.iterations;
  return out;
}

struct OptimalityCertificate {
  bool pass = false;
  Eigen::VectorXd gradient;  // sum over nonzero residuals of w (tau - I(r<0)) x
  Eigen::VectorXd bound;     // sum over zero residuals of w max(tau, 1-tau) |x|
  Eigen::VectorXd margin;    // bound - |gradient|; negative entries fail
};

/// Coordinate-wise subgradient check for a single-quantile solution.
inline OptimalityCertificate check_optimality(const QrProblem& problem, const QrSolution& solution,
                                              double tolerance = 1e-9) {
  const auto& X = problem.covariates;
  const Eigen::VectorXd beta = solution.beta();
  const Eigen::VectorXd r = problem.targets - X * beta;
  const double tau = problem.tau;
  const double scale = 1.0 + problem.targets.cwiseAbs().maxCoeff();
  OptimalityCertificate cert;
  cert.gradient = Eigen::VectorXd::Zero(X.cols());
  cert.bound = Eigen::VectorXd::Zero(X.cols());
  for (Index t = 0; t < r.size(); ++t) {
    const double w = problem.weights[t];
    if (w <= 0.0) continue;
    if (std::abs(r[t]) <= tolerance * scale) {
      cert.bound += w * std::max(tau, 1.0 - tau) * X.row(t).transpose().cwiseAbs();
    } else {
      cert.gradient += w * (tau - (r[t] < 0.0 ? 1.0 : 0.0)) * X.row(t).transpose();
    }
  }
  cert.margin = cert.bound - cert.gradient.cwiseAbs();
  const double slack = tolerance * (1.0 + problem.weights.sum()) * (1.0 + X.cwiseAbs().maxCoeff());
  cert.pass = (cert.margin.array() >= -slack).all();
  return cert;
}

}  // namespace iar
