#pragma once

// Tri-cube nearest-neighbour weights over momentum distance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iar/error.hpp"

namespace iar {

/// Nearest-neighbour window as a share of the sample, held as a whole percent
/// on the grid 10, 15, ..., 90 so comparisons and map keys are exact.
class BandwidthSpec {
 public:
  BandwidthSpec() = default;

  static BandwidthSpec from_percent(int percent) {
    if (percent < 10 || percent > 90 || percent % 5 != 0) {
      throw Error(ErrorKind::invalid_argument,
                  "bandwidth fraction must be one of 0.10, 0.15, ..., 0.90 (got " + std::to_string(percent) + "%)");
    }
    BandwidthSpec s;
    s.percent_ = percent;
    return s;
  }

  static BandwidthSpec from_fraction(double fraction) {
    const double p = fraction * 100.0;
    const long r = std::lround(p);
    if (!std::isfinite(p) || std::abs(p - static_cast<double>(r)) > 1e-6) {
      throw Error(ErrorKind::invalid_argument, "bandwidth fraction must be one of 0.10, 0.15, ..., 0.90");
    }
    return from_percent(static_cast<int>(r));
  }

  int percent() const { return percent_; }
  double fraction() const { return percent_ / 100.0; }

  /// ceil(fraction * T) without floating-point rounding.
  Eigen::Index window(Eigen::Index T) const { return (static_cast<Eigen::Index>(percent_) * T + 99) / 100; }

  auto operator<=>(const BandwidthSpec&) const = default;

 private:
  int percent_ = 50;
};

/// The 17 candidate fractions 0.10 .. 0.90.
inline std::vector<BandwidthSpec> bandwidth_candidates() {
  std::vector<BandwidthSpec> out;
  for (int p = 10; p <= 90; p += 5) out.push_back(BandwidthSpec::from_percent(p));
  return out;
}

inline double tricube(double d, double d_tau) {
  if (!(d < d_tau)) return 0.0;
  const double u = d / d_tau;
  const double v = 1.0 - u * u * u;
  return v * v * v / d_tau;
}

struct KernelWeights {
  Eigen::VectorXd weights;
  double d_tau = 0.0;
  Eigen::Index window = 0;
  std::vector<std::string> warnings;
};

/// w_t = I(d_t <= d_tau) (1 - (d_t/d_tau)^3)^3 / d_tau with d_tau the m-th
/// smallest |z_t - target|. `min_positive` is the number of strictly positive
/// weights the caller needs (K + 1 for a K-covariate fit); the window grows
/// until it is met.
inline KernelWeights tricube_weights(const Eigen::VectorXd& z, double target, const BandwidthSpec& spec,
                                     Eigen::Index min_positive = 1) {
  const Eigen::Index T = z.size();
  const Eigen::Index m0 = spec.window(T);
  if (T == 0 || m0 > T) throw Error(ErrorKind::insufficient_data, "sample shorter than the kernel window");
  if (!z.allFinite() || !std::isfinite(target)) throw Error(ErrorKind::invalid_argument, "non-finite momentum value");

  Eigen::VectorXd d = (z.array() - target).abs();
  std::vector<double> sorted(d.data(), d.data() + T);
  std::sort(sorted.begin(), sorted.end());

  KernelWeights out;
  for (Eigen::Index m = m0; m <= T; ++m) {
    const double d_tau = sorted[static_cast<std::size_t>(m - 1)];
    Eigen::VectorXd w(T);
    if (d_tau == 0.0) {
      for (Eigen::Index t = 0; t < T; ++t) w[t] = d[t] == 0.0 ? 1.0 : 0.0;
    } else {
      for (Eigen::Index t = 0; t < T; ++t) w[t] = tricube(d[t], d_tau);
    }
    if ((w.array() > 0.0).count() >= min_positive) {
      if (d_tau == 0.0) {
        out.warnings.push_back("window distance is zero at z=" + std::to_string(target) +
                               "; uniform weights over tied observations");
      }
      if (m > m0) {
        out.warnings.push_back("kernel window widened from " + std::to_string(m0) + " to " + std::to_string(m) +
                               " observations at z=" + std::to_string(target));
      }
      out.weights = std::move(w);
      out.d_tau = d_tau;
      out.window = m;
      return out;
    }
  }
  throw Error(ErrorKind::insufficient_data, "fewer than " + std::to_string(min_positive) +
                                                " observations with positive kernel weight at z=" +
                                                std::to_string(target));
}

/// Mean holdout loss per candidate; +inf marks a candidate whose fits failed.
using LossTable = std::map<BandwidthSpec, double>;

/// Argmin of the table; ties go to the larger fraction.
inline BandwidthSpec select_bandwidth(const LossTable& table) {
  if (table.empty()) throw Error(ErrorKind::selection, "empty bandwidth loss table");
  const BandwidthSpec* best = nullptr;
  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto& [spec, loss] : table) {
    if (std::isfinite(loss) && loss <= best_loss) {
      best = &spec;
      best_loss = loss;
    }
  }
  if (!best) throw Error(ErrorKind::selection, "every bandwidth candidate has infinite loss");
  return *best;
}

}  // namespace iar
