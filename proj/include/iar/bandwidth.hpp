#pragma once

// Bandwidth choice by one-step-ahead forecasting over the final tenth of the
// sample.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "iar/estimators.hpp"
#include "iar/kernel.hpp"
#include "iar/parallel.hpp"

namespace iar {

struct CvOptions {
  Estimator estimator = Estimator::cpqr;
  int holdout_percent = 10;
};

struct CvResult {
  LossTable losses;
  std::vector<std::string> warnings;
  Index holdout = 0;
};

/// Rows usable for fitting at origin i: those whose target is observed by then.
inline Index training_rows(const DesignSet& d, Index i) {
  const auto limit = d.origin_dates[static_cast<std::size_t>(i)].ordinal() - d.horizon;
  Index n = 0;
  while (n < d.rows() && d.origin_dates[static_cast<std::size_t>(n)].ordinal() <= limit) ++n;
  return n;
}

/// Summed check loss over taus of the rearranged forecast at origin i, fitted
/// on the rows available at i.
inline double holdout_loss(const DesignSet& design, Index i, const std::vector<double>& taus,
                           const ConditioningGrid& grid, const BandwidthSpec& spec, Estimator e) {
  const DesignSet train = design.head(training_rows(design, i));
  const double z = design.momentum[i];
  const Eigen::MatrixXd B = fit_for_forecast(e, train, taus, grid, spec, z);
  const auto f = predict_from(B, taus, estimator_row(design.covariates.row(i).transpose(), z, e));
  double loss = 0.0;
  for (std::size_t q = 0; q < taus.size(); ++q)
    loss += check_loss(design.target[i] - f.rearranged[static_cast<Index>(q)], taus[q]);
  return loss;
}

inline CvResult cv_losses(const DesignSet& design, const std::vector<double>& taus, const ConditioningGrid& grid,
                          const std::vector<BandwidthSpec>& fractions, const CvOptions& options = {}) {
  if (fractions.empty()) throw Error(ErrorKind::invalid_argument, "no bandwidth candidates");
  const Index T = design.rows();
  const Index H = (static_cast<Index>(options.holdout_percent) * T + 99) / 100;
  if (H < 5) {
    throw Error(ErrorKind::insufficient_data,
                "cross-validation holdout has " + std::to_string(H) + " origins (need at least 5)");
  }
  const Index first = T - H;
  const std::size_t F = fractions.size();
  const auto n = F * static_cast<std::size_t>(H);
  std::vector<double> loss(n, 0.0);
  std::vector<std::string> failure(n);
  parallel_for(n, [&](std::size_t job) {
    const auto& spec = fractions[job / static_cast<std::size_t>(H)];
    const Index i = first + static_cast<Index>(job % static_cast<std::size_t>(H));
    try {
      loss[job] = holdout_loss(design, i, taus, grid, spec, options.estimator);
    } catch (const Error& e) {
      loss[job] = std::numeric_limits<double>::infinity();
      failure[job] = e.what();
    }
  });

  CvResult out;
  out.holdout = H;
  for (std::size_t f = 0; f < F; ++f) {
    double sum = 0.0;
    std::string why;
    for (Index h = 0; h < H; ++h) {
      const auto job = f * static_cast<std::size_t>(H) + static_cast<std::size_t>(h);
      sum += loss[job];
      if (why.empty() && !failure[job].empty()) why = failure[job];
    }
    out.losses[fractions[f]] = sum / static_cast<double>(H);
    if (!why.empty()) {
      out.warnings.push_back("bandwidth " + std::to_string(fractions[f].fraction()) + " failed: " + why);
    }
  }
  return out;
}

}  // namespace iar
