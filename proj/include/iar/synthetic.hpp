#pragma once

// Closed-form data generating processes with known conditional quantiles.
//
//   location-shift     y' = alpha + rho y + 0.3 gdp - 0.2 nfci + sigma e
//   two-regime-slope   y' = alpha + beta(z) y + sigma e, beta = beta_low (z < 0), beta_high (z >= 0)
//   momentum-free      y' = alpha + rho y + sigma e
//   heteroskedastic    y' = alpha + rho y + 0.2 gdp + sigma (0.5 + 0.5 gdp) e, gdp ~ U(0, 4)
//
// z = y - y_prev, e ~ N(0,1). gdp, import and nfci are drawn independently of
// y (gdp ~ N(2,1) except in the heteroskedastic design, import ~ N(0,2),
// nfci ~ N(0,1)). The default sigma puts roughly 95% of momentum values inside
// the default conditioning grid [-2, 2].

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "iar/dataprep.hpp"
#include "iar/error.hpp"

namespace iar {

enum class Dgp { location_shift, two_regime_slope, momentum_free, heteroskedastic };

inline const char* to_string(Dgp d) {
  switch (d) {
    case Dgp::location_shift: return "location-shift";
    case Dgp::two_regime_slope: return "two-regime-slope";
    case Dgp::momentum_free: return "momentum-free";
    case Dgp::heteroskedastic: return "heteroskedastic";
  }
  return "?";
}

inline std::optional<Dgp> parse_dgp(const std::string& s) {
  for (auto d : {Dgp::location_shift, Dgp::two_regime_slope, Dgp::momentum_free, Dgp::heteroskedastic})
    if (s == to_string(d)) return d;
  return std::nullopt;
}

struct SyntheticSpec {
  Dgp dgp = Dgp::location_shift;
  Index T = 400;
  std::uint64_t seed = 1;
  double alpha = 0.5;
  double rho = 0.5;
  double beta_low = 0.3;
  double beta_high = 0.9;
  double sigma = 0.75;
  Index burn_in = 200;
  Quarter start{1960, 1};
};

inline void validate(const SyntheticSpec& s) {
  if (s.T < 3) throw Error(ErrorKind::invalid_argument, "synthetic T must be at least 3");
  if (!(s.sigma > 0.0)) throw Error(ErrorKind::invalid_argument, "synthetic sigma must be positive");
  for (double b : {s.rho, s.beta_low, s.beta_high})
    if (!(std::abs(b) < 1.0)) throw Error(ErrorKind::invalid_argument, "autoregressive coefficients must lie in (-1, 1)");
  if (s.burn_in < 0) throw Error(ErrorKind::invalid_argument, "burn-in must be nonnegative");
}

/// Regime slope used by the two-regime design at momentum z.
inline double regime_slope(const SyntheticSpec& s, double z) { return z < 0.0 ? s.beta_low : s.beta_high; }

inline ObservationFrame generate_synthetic(const SyntheticSpec& s) {
  validate(s);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u04(0.0, 4.0);

  const Index N = s.T + s.burn_in;
  std::vector<double> y(static_cast<std::size_t>(N)), gdp(y.size()), imp(y.size()), nfci(y.size());
  double prev = 0.0, cur = 0.0;
  for (Index t = 0; t < N; ++t) {
    const auto i = static_cast<std::size_t>(t);
    gdp[i] = s.dgp == Dgp::heteroskedastic ? u04(rng) : 2.0 + n01(rng);
    imp[i] = 2.0 * n01(rng);
    nfci[i] = n01(rng);
    y[i] = cur;
    const double e = n01(rng);
    const double z = cur - prev;
    double next = 0.0;
    switch (s.dgp) {
      case Dgp::location_shift: next = s.alpha + s.rho * cur + 0.3 * gdp[i] - 0.2 * nfci[i] + s.sigma * e; break;
      case Dgp::two_regime_slope: next = s.alpha + regime_slope(s, z) * cur + s.sigma * e; break;
      case Dgp::momentum_free: next = s.alpha + s.rho * cur + s.sigma * e; break;
      case Dgp::heteroskedastic:
        next = s.alpha + s.rho * cur + 0.2 * gdp[i] + s.sigma * (0.5 + 0.5 * gdp[i]) * e;
        break;
    }
    prev = cur;
    cur = next;
  }

  ObservationFrame f;
  const auto b = static_cast<std::size_t>(s.burn_in);
  for (Index t = 0; t < s.T; ++t) f.dates.push_back(s.start + static_cast<int>(t));
  f.columns[roles::inflation].assign(y.begin() + static_cast<std::ptrdiff_t>(b), y.end());
  f.columns[roles::gdp].assign(gdp.begin() + static_cast<std::ptrdiff_t>(b), gdp.end());
  f.columns[roles::import].assign(imp.begin() + static_cast<std::ptrdiff_t>(b), imp.end());
  f.columns[roles::nfci].assign(nfci.begin() + static_cast<std::ptrdiff_t>(b), nfci.end());
  return f;
}

}  // namespace iar
