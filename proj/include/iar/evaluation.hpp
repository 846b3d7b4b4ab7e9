#pragma once

// Density-fit evaluation: pseudo R2, quantile scores, qwCRPS, Diebold-Mariano
// comparisons and PIT calibration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iar/error.hpp"
#include "iar/estimators.hpp"
#include "iar/qr_solver.hpp"

namespace iar {

// ---------------------------------------------------------------------------
// Pseudo R2

struct PseudoR2 {
  double value = 0.0;
  double rasw = 0.0;
  double tasw = 0.0;
  bool degenerate = false;
  std::string note;
};

/// 1 - RASW/TASW from the regression of realizations on an intercept and the
/// fitted quantile V at tau.
inline PseudoR2 pseudo_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& V, double tau) {
  if (y.size() != V.size()) throw Error(ErrorKind::invalid_argument, "pseudo_r2: realizations and fitted values differ in length");
  if (y.size() < 3) throw Error(ErrorKind::insufficient_data, "pseudo_r2 needs at least 3 observations");
  if (!y.allFinite() || !V.allFinite()) throw Error(ErrorKind::invalid_argument, "pseudo_r2: non-finite input");
  detail::validate_tau(tau);
  const Index n = y.size();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  PseudoR2 out;
  out.tasw = solve_weighted_qr({y, Eigen::MatrixXd::Ones(n, 1), ones, tau}).objective;
  if (V.maxCoeff() == V.minCoeff()) {
    out.rasw = out.tasw;
    out.degenerate = true;
    out.note = "fitted quantile is constant";
    return out;
  }
  if (out.tasw <= 0.0) throw Error(ErrorKind::undefined, "pseudo_r2: total absolute sum of weighted residuals is zero");
  Eigen::MatrixXd X(n, 2);
  X.col(0) = ones;
  X.col(1) = V;
  out.rasw = solve_weighted_qr({y, X, ones, tau}).objective;
  out.value = 1.0 - out.rasw / out.tasw;
  return out;
}

// ---------------------------------------------------------------------------
// Quantile scores and qwCRPS

enum class WeightScheme { equal, center, left, right };

inline const std::vector<WeightScheme>& all_schemes() {
  static const std::vector<WeightScheme> v{WeightScheme::equal, WeightScheme::center, WeightScheme::left,
                                           WeightScheme::right};
  return v;
}

inline const char* to_string(WeightScheme s) {
  switch (s) {
    case WeightScheme::equal: return "equal";
    case WeightScheme::center: return "center";
    case WeightScheme::left: return "left";
    case WeightScheme::right: return "right";
  }
  return "?";
}

inline std::optional<WeightScheme> parse_scheme(const std::string& s) {
  for (auto w : all_schemes())
    if (s == to_string(w)) return w;
  return std::nullopt;
}

/// Shape of the weight profile at quantile level q (1 for the equal scheme).
inline double scheme_weight(WeightScheme s, double q) {
  switch (s) {
    case WeightScheme::equal: return 1.0;
    case WeightScheme::center: return q * (1.0 - q);
    case WeightScheme::left: return (1.0 - q) * (1.0 - q);
    case WeightScheme::right: return q * q;
  }
  return 0.0;
}

inline Eigen::VectorXd quantile_scores(const ForecastDensity& f) {
  if (is_missing(f.realization)) throw Error(ErrorKind::invalid_argument, "quantile_scores: realization is missing");
  const auto Q = static_cast<Index>(f.taus.size());
  if (f.rearranged.size() != Q) throw Error(ErrorKind::invalid_argument, "quantile_scores: quantile count mismatch");
  Eigen::VectorXd qs(Q);
  for (Index q = 0; q < Q; ++q)
    qs[q] = check_loss(f.realization - f.rearranged[q], f.taus[static_cast<std::size_t>(q)]);
  return qs;
}

struct QwCrps {
  Eigen::VectorXd per_origin;
  double mean = 0.0;
};

/// qwCRPS_t = (1/Q) sum_q w(tau_q) QS_{t,q}. scores is origins x Q.
inline QwCrps qwcrps(const Eigen::MatrixXd& scores, const std::vector<double>& taus, WeightScheme scheme) {
  const auto Q = static_cast<Index>(taus.size());
  if (scores.cols() != Q) throw Error(ErrorKind::invalid_argument, "qwcrps: score columns do not match taus");
  Eigen::VectorXd w(Q);
  for (Index q = 0; q < Q; ++q) w[q] = scheme_weight(scheme, taus[static_cast<std::size_t>(q)]) / static_cast<double>(Q);
  QwCrps out;
  out.per_origin = scores * w;
  out.mean = scores.rows() > 0 ? out.per_origin.mean() : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Diebold-Mariano

struct DmResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int lag = 0;
};

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

/// Newey-West long-run variance of d with Bartlett weights up to lag.
inline double newey_west(const Eigen::VectorXd& d, int lag) {
  const Index n = d.size();
  const Eigen::VectorXd c = d.array() - d.mean();
  auto gamma = [&](Index j) { return c.head(n - j).dot(c.tail(n - j)) / static_cast<double>(n); };
  double lrv = gamma(0);
  for (int j = 1; j <= lag && j < n; ++j) lrv += 2.0 * (1.0 - j / (lag + 1.0)) * gamma(j);
  return lrv;
}

/// Positive statistics mean loss_a exceeds loss_b.
inline DmResult dm_test(const Eigen::VectorXd& loss_a, const Eigen::VectorXd& loss_b, int h) {
  if (loss_a.size() != loss_b.size()) throw Error(ErrorKind::invalid_argument, "dm_test: loss series differ in length");
  if (loss_a.size() < 10) throw Error(ErrorKind::insufficient_data, "dm_test needs at least 10 paired losses");
  if (h < 1) throw Error(ErrorKind::invalid_argument, "dm_test: horizon must be positive");
  const Eigen::VectorXd d = loss_a - loss_b;
  const double n = static_cast<double>(d.size());
  const double mean = d.mean();
  DmResult out;
  out.lag = h - 1;
  double lrv = newey_west(d, out.lag);
  if (!(lrv > 0.0)) {
    out.lag = 0;
    lrv = newey_west(d, 0);
  }
  if (!(lrv > 0.0)) {
    if (mean == 0.0) return out;
    throw Error(ErrorKind::degeneracy, "dm_test: loss differential has zero variance and nonzero mean");
  }
  out.statistic = mean / std::sqrt(lrv / n);
  out.p_value = normal_two_sided_p(out.statistic);
  return out;
}

/// Significance code at the 10/5/1% levels.
inline std::string stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

// ---------------------------------------------------------------------------
// PIT

/// Forecast CDF at the realization by linear interpolation of tau against the
/// rearranged quantiles, clamped to [tau_min, tau_max].
inline double pit_value(const ForecastDensity& f) {
  if (is_missing(f.realization)) throw Error(ErrorKind::invalid_argument, "pit_value: realization is missing");
  const auto& q = f.rearranged;
  const auto& taus = f.taus;
  const auto Q = static_cast<Index>(taus.size());
  if (Q == 0 || q.size() != Q) throw Error(ErrorKind::invalid_argument, "pit_value: quantile count mismatch");
  const double y = f.realization;
  Index lo = 0;
  while (lo < Q && q[lo] < y) ++lo;
  Index hi = lo;
  while (hi < Q && q[hi] == y) ++hi;
  if (hi > lo) return 0.5 * (taus[static_cast<std::size_t>(lo)] + taus[static_cast<std::size_t>(hi - 1)]);
  if (lo == 0) return taus.front();
  if (lo == Q) return taus.back();
  const double t0 = taus[static_cast<std::size_t>(lo - 1)], t1 = taus[static_cast<std::size_t>(lo)];
  return t0 + (t1 - t0) * (y - q[lo - 1]) / (q[lo] - q[lo - 1]);
}

inline Eigen::VectorXd pit_grid(Index points = 101) { return Eigen::VectorXd::LinSpaced(points, 0.0, 1.0); }

/// Share of PIT values at or below each r.
inline Eigen::VectorXd pit_cdf(const std::vector<double>& pits, const Eigen::VectorXd& r) {
  std::vector<double> s = pits;
  std::sort(s.begin(), s.end());
  Eigen::VectorXd out(r.size());
  for (Index i = 0; i < r.size(); ++i) {
    const auto k = std::upper_bound(s.begin(), s.end(), r[i]) - s.begin();
    out[i] = s.empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(s.size());
  }
  return out;
}

/// Kolmogorov-Smirnov distance of a sample from the uniform CDF.
inline double ks_distance(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = std::clamp(u[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
  }
  return d;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS test against U(0,1), Kolmogorov limit with Stephens'
/// finite-sample scaling.
inline KsResult ks_uniform(const std::vector<double>& u) {
  if (u.empty()) throw Error(ErrorKind::insufficient_data, "ks_uniform: empty sample");
  KsResult out;
  out.statistic = ks_distance(u);
  const double sn = std::sqrt(static_cast<double>(u.size()));
  const double lambda = (sn + 0.12 + 0.11 / sn) * out.statistic;
  if (lambda < 0.2) return out;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  out.p_value = std::clamp(p, 0.0, 1.0);
  return out;
}

struct PitBands {
  Eigen::VectorXd r;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  double radius = 0.0;
  std::string label = "guidance only: iid-uniform Monte Carlo envelope";
};

/// Monte Carlo sup-deviation envelope around the 45-degree line.
inline PitBands pit_bands(Index n, double level, int draws, std::uint64_t seed, Index grid_points = 101) {
  if (n < 10) throw Error(ErrorKind::insufficient_data, "pit_bands needs n >= 10");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::invalid_argument, "pit_bands: level must lie in (0, 1)");
  if (draws < 1) throw Error(ErrorKind::invalid_argument, "pit_bands: draws must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> sup(static_cast<std::size_t>(draws));
  std::vector<double> sample(static_cast<std::size_t>(n));
  for (auto& s : sup) {
    for (auto& v : sample) v = u01(rng);
    s = ks_distance(sample);
  }
  std::sort(sup.begin(), sup.end());
  const auto k = static_cast<std::size_t>(std::ceil((1.0 - level) * draws));
  PitBands out;
  out.radius = sup[std::clamp<std::size_t>(k, 1, sup.size()) - 1];
  out.r = pit_grid(grid_points);
  out.lo = (out.r.array() - out.radius).max(0.0);
  out.hi = (out.r.array() + out.radius).min(1.0);
  return out;
}

}  // namespace iar
