#pragma once

// QAR(1), QAR(2), their non-crossing variants, composite QR and the
// conditionally parametric QR, all producing a (quantile x grid x covariate)
// coefficient cube.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iar/dataprep.hpp"
#include "iar/error.hpp"
#include "iar/kernel.hpp"
#include "iar/parallel.hpp"
#include "iar/qr_solver.hpp"

namespace iar {

/// 0.05, 0.10, ..., 0.95
inline std::vector<double> default_taus() {
  std::vector<double> t;
  for (int i = 1; i <= 19; ++i) t.push_back(static_cast<double>(5 * i) / 100.0);
  return t;
}

enum class Estimator { qar1, qar2, ncqar1, ncqar2, cqr, cpqr, cpqr_free };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::qar1: return "qar1";
    case Estimator::qar2: return "qar2";
    case Estimator::ncqar1: return "ncqar1";
    case Estimator::ncqar2: return "ncqar2";
    case Estimator::cqr: return "cqr";
    case Estimator::cpqr: return "cpqr";
    case Estimator::cpqr_free: return "cpqr-free";
  }
  return "?";
}

inline std::optional<Estimator> parse_estimator(const std::string& s) {
  for (auto e : {Estimator::qar1, Estimator::qar2, Estimator::ncqar1, Estimator::ncqar2, Estimator::cqr, Estimator::cpqr,
                 Estimator::cpqr_free}) {
    if (s == to_string(e)) return e;
  }
  return std::nullopt;
}

/// Whether the estimator conditions on momentum through the grid.
inline bool is_conditional(Estimator e) {
  return e == Estimator::cqr || e == Estimator::cpqr || e == Estimator::cpqr_free;
}

/// Whether momentum enters as an extra covariate column.
inline bool uses_momentum_column(Estimator e) { return e == Estimator::qar2 || e == Estimator::ncqar2; }

struct CoefficientCube {
  std::string estimator;
  std::vector<double> taus;
  ConditioningGrid grid;
  std::vector<std::string> names;
  std::optional<BandwidthSpec> bandwidth;
  bool noncrossing = false;
  std::vector<double> values;  // (q * G + g) * K + k
  std::vector<std::string> warnings;

  std::size_t num_taus() const { return taus.size(); }
  std::size_t num_grid() const { return grid.size(); }
  std::size_t num_covariates() const { return names.size(); }

  double& at(std::size_t q, std::size_t g, std::size_t k) {
    return values[(q * num_grid() + g) * num_covariates() + k];
  }
  double at(std::size_t q, std::size_t g, std::size_t k) const {
    return values[(q * num_grid() + g) * num_covariates() + k];
  }

  /// Q x K coefficients at grid point g.
  Eigen::MatrixXd slice(std::size_t g) const {
    Eigen::MatrixXd B(num_taus(), num_covariates());
    for (std::size_t q = 0; q < num_taus(); ++q)
      for (std::size_t k = 0; k < num_covariates(); ++k) B(static_cast<Index>(q), static_cast<Index>(k)) = at(q, g, k);
    return B;
  }

  void set_slice(std::size_t g, const Eigen::MatrixXd& B) {
    for (std::size_t q = 0; q < num_taus(); ++q)
      for (std::size_t k = 0; k < num_covariates(); ++k) at(q, g, k) = B(static_cast<Index>(q), static_cast<Index>(k));
  }

  std::size_t covariate_index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorKind::invalid_argument, "cube has no covariate " + name);
    return static_cast<std::size_t>(it - names.begin());
  }

  static CoefficientCube shaped(std::string estimator, std::vector<double> taus, ConditioningGrid grid,
                                std::vector<std::string> names) {
    CoefficientCube c;
    c.estimator = std::move(estimator);
    c.taus = std::move(taus);
    c.grid = std::move(grid);
    c.names = std::move(names);
    c.values.assign(c.taus.size() * c.grid.size() * c.names.size(), 0.0);
    return c;
  }
};

struct ForecastDensity {
  Quarter origin;
  std::vector<double> taus;
  Eigen::VectorXd raw;
  Eigen::VectorXd rearranged;
  double realization = kMissing;
  std::size_t grid_index = 0;
};

// ---------------------------------------------------------------------------
// Worst-case non-crossing rows

struct WorstCaseRows {
  std::vector<ConstraintRow> rows;
  Index aux_count = 0;
  std::vector<std::string> warnings;
};

/// Non-crossing rows over the bounding box of `local` (intercept in column 0).
/// With x_k scaled to [0,1] over the rows, non-crossing on the whole box is
///   d0' + sum_k min(0, dk') >= 0,   dk' = range_k dk,  d0' = d0 + sum_k dk min_k,
/// written as an LP with one auxiliary s_k <= min(0, dk') per column and pair.
/// A column constant over the rows only shifts the intercept and gets no s_k.
inline WorstCaseRows worst_case_rows(const Eigen::MatrixXd& local, Index num_taus,
                                     const std::vector<std::string>& names = {}) {
  if (local.rows() == 0) throw Error(ErrorKind::invalid_argument, "worst-case rows need at least one observation");
  const Index K = local.cols();
  const Index Q = num_taus;
  const Eigen::VectorXd lo = local.colwise().minCoeff();
  const Eigen::VectorXd hi = local.colwise().maxCoeff();

  WorstCaseRows out;
  std::vector<Index> varying;
  for (Index k = 1; k < K; ++k) {
    if (hi[k] > lo[k]) {
      varying.push_back(k);
    } else {
      const std::string label = static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)]
                                                                            : "column " + std::to_string(k);
      out.warnings.push_back(label + " is constant over the local rows; dropped from the worst-case constraint");
    }
  }
  const Index V = static_cast<Index>(varying.size());
  out.aux_count = (Q - 1) * V;

  for (Index q = 1; q < Q; ++q) {
    const Index aux0 = Q * K + (q - 1) * V;
    ConstraintRow main;
    auto add_diff = [&](ConstraintRow& row, Index k, double c) {
      row.terms.emplace_back(q * K + k, c);
      row.terms.emplace_back((q - 1) * K + k, -c);
    };
    add_diff(main, 0, 1.0);
    for (Index k = 1; k < K; ++k) {
      if (lo[k] != 0.0) add_diff(main, k, lo[k]);
    }
    for (Index j = 0; j < V; ++j) main.terms.emplace_back(aux0 + j, 1.0);
    out.rows.push_back(std::move(main));
    for (Index j = 0; j < V; ++j) {
      const Index k = varying[static_cast<std::size_t>(j)];
      out.rows.push_back(ConstraintRow{{{aux0 + j, -1.0}}});
      ConstraintRow upper;
      add_diff(upper, k, hi[k] - lo[k]);
      upper.terms.emplace_back(aux0 + j, -1.0);
      out.rows.push_back(std::move(upper));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single weighted fit (one grid point, or the whole sample)

enum class FitMode { free, noncrossing, composite };

struct LocalFit {
  Eigen::MatrixXd coefficients;  // Q x K
  std::vector<std::string> warnings;
};

/// Largest decrease of fitted quantiles between adjacent taus over the rows.
inline double max_crossing(const Eigen::MatrixXd& rows, const Eigen::MatrixXd& B) {
  double worst = 0.0;
  if (rows.rows() == 0) return worst;
  const Eigen::MatrixXd fitted = rows * B.transpose();
  for (Index q = 1; q < fitted.cols(); ++q) worst = std::max(worst, (fitted.col(q - 1) - fitted.col(q)).maxCoeff());
  return worst;
}

/// Fits all taus on one weighted sample. `local` flags the rows whose
/// covariate box the non-crossing rows must cover.
inline LocalFit fit_local(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                          const std::vector<bool>& local, const std::vector<double>& taus, FitMode mode,
                          const std::vector<std::string>& names = {}) {
  LocalFit out;
  const auto Q = static_cast<Index>(taus.size());
  if (mode == FitMode::composite) {
    out.coefficients = solve_composite_qr(y, X, w, taus).coefficients;
    return out;
  }
  StackedQrProblem p{y, X, w, taus, 0, {}};
  Eigen::MatrixXd box;
  if (mode == FitMode::noncrossing && Q > 1) {
    std::vector<Index> rows;
    for (std::size_t t = 0; t < local.size(); ++t)
      if (local[t]) rows.push_back(static_cast<Index>(t));
    if (rows.empty()) {
      out.warnings.push_back("no observations in the local interval; non-crossing rows skipped");
    } else {
      box = X(rows, Eigen::all);
      auto wc = worst_case_rows(box, Q, names);
      p.aux_count = wc.aux_count;
      p.constraints = std::move(wc.rows);
      out.warnings.insert(out.warnings.end(), wc.warnings.begin(), wc.warnings.end());
    }
  }
  out.coefficients = solve_stacked_qr(p).coefficients;
  if (box.rows() > 0) {
    const double scale = 1.0 + y.cwiseAbs().maxCoeff();
    const double gap = max_crossing(box, out.coefficients);
    if (gap > 1e-8 * scale) out.warnings.push_back("fitted quantiles cross by " + std::to_string(gap));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimators over a design

/// Covariate matrix and names an estimator sees: QAR(2) variants append momentum.
inline Eigen::MatrixXd estimator_covariates(const DesignSet& d, Estimator e) {
  if (!uses_momentum_column(e)) return d.covariates;
  Eigen::MatrixXd X(d.rows(), d.num_covariates() + 1);
  X << d.covariates, d.momentum;
  return X;
}

inline std::vector<std::string> estimator_names(const DesignSet& d, Estimator e) {
  auto n = d.names;
  if (uses_momentum_column(e)) n.push_back("momentum");
  return n;
}

/// Row for prediction at a single origin.
inline Eigen::VectorXd estimator_row(const Eigen::VectorXd& covariates, double momentum, Estimator e) {
  if (!uses_momentum_column(e)) return covariates;
  Eigen::VectorXd r(covariates.size() + 1);
  r << covariates, momentum;
  return r;
}

inline CoefficientCube fit_qar(const DesignSet& design, const std::vector<double>& taus, int lags, bool noncrossing) {
  if (lags != 1 && lags != 2) throw Error(ErrorKind::invalid_argument, "lags must be 1 or 2");
  const Estimator e = lags == 1 ? (noncrossing ? Estimator::ncqar1 : Estimator::qar1)
                                : (noncrossing ? Estimator::ncqar2 : Estimator::qar2);
  const Eigen::MatrixXd X = estimator_covariates(design, e);
  auto cube = CoefficientCube::shaped(to_string(e), taus, ConditioningGrid(), estimator_names(design, e));
  cube.noncrossing = noncrossing;
  const std::vector<bool> all(static_cast<std::size_t>(design.rows()), true);
  auto fit = fit_local(design.target, X, Eigen::VectorXd::Ones(design.rows()), all, taus,
                       noncrossing ? FitMode::noncrossing : FitMode::free, cube.names);
  cube.set_slice(0, fit.coefficients);
  cube.warnings = std::move(fit.warnings);
  return cube;
}

/// Rows whose momentum is nearest to grid point g (lower point on exact ties),
/// the same assignment prediction uses.
inline std::vector<bool> local_indicator(const Eigen::VectorXd& momentum, const ConditioningGrid& grid, std::size_t g) {
  std::vector<bool> in(static_cast<std::size_t>(momentum.size()));
  for (Index t = 0; t < momentum.size(); ++t) in[static_cast<std::size_t>(t)] = grid.nearest(momentum[t]) == g;
  return in;
}

/// One grid point of the CPQR (or CQR) surface.
inline LocalFit fit_grid_point(const DesignSet& design, const std::vector<double>& taus, const ConditioningGrid& grid,
                               std::size_t g, const BandwidthSpec& spec, FitMode mode) {
  const Index K = design.num_covariates();
  auto kw = tricube_weights(design.momentum, grid[g], spec, K + 1);
  const auto local = local_indicator(design.momentum, grid, g);
  try {
    auto fit = fit_local(design.target, design.covariates, kw.weights, local, taus, mode, design.names);
    fit.warnings.insert(fit.warnings.begin(), kw.warnings.begin(), kw.warnings.end());
    return fit;
  } catch (const Error& e) {
    throw Error(e.kind(), "grid point z=" + std::to_string(grid[g]) + ": " + e.what());
  }
}

namespace detail {
inline CoefficientCube fit_surface(const DesignSet& design, const std::vector<double>& taus,
                                   const ConditioningGrid& grid, const BandwidthSpec& spec, Estimator e, FitMode mode) {
  auto cube = CoefficientCube::shaped(to_string(e), taus, grid, design.names);
  cube.bandwidth = spec;
  cube.noncrossing = mode == FitMode::noncrossing;
  std::vector<LocalFit> fits(grid.size());
  parallel_for(grid.size(), [&](std::size_t g) { fits[g] = fit_grid_point(design, taus, grid, g, spec, mode); });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    cube.set_slice(g, fits[g].coefficients);
    for (auto& w : fits[g].warnings) cube.warnings.push_back(std::move(w));
  }
  return cube;
}
}  // namespace detail

inline CoefficientCube fit_cpqr(const DesignSet& design, const std::vector<double>& taus, const ConditioningGrid& grid,
                                const BandwidthSpec& spec, bool noncrossing) {
  return detail::fit_surface(design, taus, grid, spec, noncrossing ? Estimator::cpqr : Estimator::cpqr_free,
                             noncrossing ? FitMode::noncrossing : FitMode::free);
}

inline CoefficientCube fit_cqr(const DesignSet& design, const std::vector<double>& taus, const ConditioningGrid& grid,
                               const BandwidthSpec& spec) {
  return detail::fit_surface(design, taus, grid, spec, Estimator::cqr, FitMode::composite);
}

inline FitMode fit_mode(Estimator e) {
  switch (e) {
    case Estimator::cqr: return FitMode::composite;
    case Estimator::cpqr:
    case Estimator::ncqar1:
    case Estimator::ncqar2: return FitMode::noncrossing;
    default: return FitMode::free;
  }
}

/// Any estimator by id; `spec` is ignored by the unconditional ones.
inline CoefficientCube fit_estimator(Estimator e, const DesignSet& design, const std::vector<double>& taus,
                                     const ConditioningGrid& grid, const BandwidthSpec& spec) {
  switch (e) {
    case Estimator::qar1: return fit_qar(design, taus, 1, false);
    case Estimator::qar2: return fit_qar(design, taus, 2, false);
    case Estimator::ncqar1: return fit_qar(design, taus, 1, true);
    case Estimator::ncqar2: return fit_qar(design, taus, 2, true);
    case Estimator::cqr: return fit_cqr(design, taus, grid, spec);
    case Estimator::cpqr: return fit_cpqr(design, taus, grid, spec, true);
    case Estimator::cpqr_free: return fit_cpqr(design, taus, grid, spec, false);
  }
  throw Error(ErrorKind::internal, "unknown estimator");
}

/// Coefficients needed to forecast from a single origin with momentum z: the
/// conditional estimators fit only the grid point nearest z.
inline Eigen::MatrixXd fit_for_forecast(Estimator e, const DesignSet& design, const std::vector<double>& taus,
                                        const ConditioningGrid& grid, const BandwidthSpec& spec, double z) {
  if (!is_conditional(e)) return fit_estimator(e, design, taus, grid, spec).slice(0);
  return fit_grid_point(design, taus, grid, grid.nearest(z), spec, fit_mode(e)).coefficients;
}

// ---------------------------------------------------------------------------
// Prediction

inline Eigen::VectorXd rearrange(const Eigen::VectorXd& raw) {
  Eigen::VectorXd r = raw;
  std::sort(r.data(), r.data() + r.size());
  return r;
}

inline ForecastDensity predict_from(const Eigen::MatrixXd& B, const std::vector<double>& taus,
                                    const Eigen::VectorXd& row) {
  if (row.size() != B.cols()) throw Error(ErrorKind::invalid_argument, "covariate row length does not match the fit");
  ForecastDensity f;
  f.taus = taus;
  f.raw = B * row;
  f.rearranged = rearrange(f.raw);
  return f;
}

/// Quantiles at the grid point nearest `momentum` (clamped to the grid ends).
inline ForecastDensity predict_quantiles(const CoefficientCube& cube, const Eigen::VectorXd& covariates,
                                         double momentum) {
  const std::size_t g = cube.grid.nearest(momentum);
  auto f = predict_from(cube.slice(g), cube.taus, covariates);
  f.grid_index = g;
  return f;
}

/// Raw in-sample fitted quantiles, T x Q, each row from the grid point
/// nearest that row's momentum.
inline Eigen::MatrixXd fitted_quantiles(const CoefficientCube& cube, const DesignSet& design) {
  const Estimator e = parse_estimator(cube.estimator).value_or(Estimator::cpqr);
  const Eigen::MatrixXd X = estimator_covariates(design, e);
  if (X.cols() != static_cast<Index>(cube.num_covariates()))
    throw Error(ErrorKind::invalid_argument, "design does not match the cube covariates");
  Eigen::MatrixXd out(design.rows(), static_cast<Index>(cube.num_taus()));
  std::vector<Eigen::MatrixXd> slices(cube.num_grid());
  for (std::size_t g = 0; g < cube.num_grid(); ++g) slices[g] = cube.slice(g);
  for (Index t = 0; t < design.rows(); ++t) {
    const auto g = cube.grid.nearest(design.momentum[t]);
    out.row(t) = (slices[g] * X.row(t).transpose()).transpose();
  }
  return out;
}

}  // namespace iar
