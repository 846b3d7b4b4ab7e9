#pragma once

// Expanding-window out-of-sample runs: fit every configured estimator at each
// origin on the rows whose targets are observed by then, forecast, rearrange
// and score.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "iar/bandwidth.hpp"
#include "iar/cube_io.hpp"
#include "iar/evaluation.hpp"
#include "iar/parallel.hpp"

namespace iar {

struct BacktestConfig {
  Index initial_window = 100;
  std::vector<double> taus = default_taus();
  ConditioningGrid grid = default_grid();
  std::vector<Estimator> estimators{Estimator::qar2, Estimator::cpqr};
  std::optional<BandwidthSpec> fixed_bandwidth;  // otherwise cross-validated
  int cv_every = 8;
  int holdout_percent = 10;
  std::uint64_t seed = 1;
  int pit_draws = 2000;
  double pit_level = 0.05;
  bool insample = true;
  bool poison_future = false;
};

struct OriginCell {
  bool ok = false;
  ForecastDensity density;
  Eigen::VectorXd scores;  // quantile scores
  double pit = kMissing;
  std::optional<BandwidthSpec> bandwidth;
  std::string error;
};

struct InsampleFit {
  double tau = 0.0;
  double pseudo_r2 = kMissing;
  double rasw = kMissing;
  double tasw = kMissing;
  bool degenerate = false;
};

struct EstimatorRun {
  Estimator estimator = Estimator::qar2;
  std::vector<OriginCell> cells;  // one per origin
  int missing = 0;
  bool valid = true;
  std::vector<InsampleFit> insample;
  std::optional<BandwidthSpec> insample_bandwidth;
  std::vector<std::string> warnings;
};

struct BacktestResult {
  BacktestConfig config;
  int horizon = 1;
  std::vector<Quarter> origins;
  std::vector<EstimatorRun> runs;
  PitBands bands;
  Json summary;
};

/// First design row usable as an origin: the one with initial_window rows of
/// observed targets behind it.
inline Index first_origin(const DesignSet& d, Index initial_window) {
  for (Index i = 0; i < d.rows(); ++i)
    if (training_rows(d, i) >= initial_window) return i;
  return d.rows();
}

/// Copy of the design with everything not observable at origin i replaced by
/// large garbage values: rows after i, and targets not yet realized.
inline DesignSet poison_after(const DesignSet& d, Index i) {
  DesignSet p = d;
  const Index visible = training_rows(d, i);
  for (Index j = 0; j < d.rows(); ++j) {
    const double junk = 1e6 * static_cast<double>(j + 1);
    if (j >= visible) p.target[j] = junk;
    if (j > i) {
      p.covariates.row(j).tail(p.covariates.cols() - 1).setConstant(junk);
      p.momentum[j] = -junk;
    }
  }
  return p;
}

inline void validate(const BacktestConfig& c, const DesignSet& d) {
  if (c.initial_window < 60) throw Error(ErrorKind::invalid_argument, "initial window must be at least 60");
  if (d.horizon != 1 && d.horizon != 4) throw Error(ErrorKind::invalid_argument, "horizon must be 1 or 4");
  if (c.estimators.empty()) throw Error(ErrorKind::invalid_argument, "no estimators configured");
  for (std::size_t i = 0; i < c.estimators.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (c.estimators[i] == c.estimators[j])
        throw Error(ErrorKind::invalid_argument, std::string("estimator listed twice: ") + to_string(c.estimators[i]));
  if (c.cv_every < 1) throw Error(ErrorKind::invalid_argument, "cross-validation cadence must be positive");
  detail::validate_taus(c.taus);
  if (d.rows() <= c.initial_window + d.horizon)
    throw Error(ErrorKind::insufficient_data, "design has " + std::to_string(d.rows()) + " rows; need more than " +
                                                  std::to_string(c.initial_window + d.horizon));
}

/// Cross-validated bandwidth for estimator e on the given sample.
inline BandwidthSpec cv_bandwidth(const DesignSet& sample, Estimator e, const BacktestConfig& c,
                                  std::vector<std::string>* warnings = nullptr) {
  const auto cv = cv_losses(sample, c.taus, c.grid, bandwidth_candidates(), {e, c.holdout_percent});
  if (warnings)
    for (const auto& w : cv.warnings) warnings->push_back(w);
  return select_bandwidth(cv.losses);
}

namespace detail {

inline OriginCell forecast_cell(const DesignSet& design, Index i, Estimator e, const std::optional<BandwidthSpec>& spec,
                                const BacktestConfig& c) {
  const DesignSet& view = design;
  const DesignSet train = view.head(training_rows(view, i));
  const double z = view.momentum[i];
  const BandwidthSpec bw = spec.value_or(BandwidthSpec::from_percent(50));
  const Eigen::MatrixXd B = fit_for_forecast(e, train, c.taus, c.grid, bw, z);
  OriginCell cell;
  cell.density = predict_from(B, c.taus, estimator_row(view.covariates.row(i).transpose(), z, e));
  cell.density.origin = view.origin_dates[static_cast<std::size_t>(i)];
  cell.density.grid_index = is_conditional(e) ? c.grid.nearest(z) : 0;
  if (is_conditional(e)) cell.bandwidth = bw;
  return cell;
}

}  // namespace detail

inline Json backtest_summary(const BacktestResult& r);

inline BacktestResult run_backtest(const DesignSet& design, const BacktestConfig& config) {
  validate(config, design);
  BacktestResult res;
  res.config = config;
  res.horizon = design.horizon;
  const Index first = first_origin(design, config.initial_window);
  const Index N = design.rows();
  if (first >= N) throw Error(ErrorKind::insufficient_data, "no forecast origins after the initial window");
  const auto n_origins = static_cast<std::size_t>(N - first);
  for (Index i = first; i < N; ++i) res.origins.push_back(design.origin_dates[static_cast<std::size_t>(i)]);
  const auto E = config.estimators.size();

  auto view_at = [&](Index i) { return config.poison_future ? poison_after(design, i) : design; };

  // Bandwidths: one cross-validation per block of cv_every origins.
  const std::size_t blocks = (n_origins + static_cast<std::size_t>(config.cv_every) - 1) /
                             static_cast<std::size_t>(config.cv_every);
  std::vector<std::optional<BandwidthSpec>> bw(E * blocks);
  std::vector<std::string> bw_error(bw.size());
  std::vector<std::vector<std::string>> bw_warn(bw.size());
  parallel_for(bw.size(), [&](std::size_t job) {
    const Estimator e = config.estimators[job / blocks];
    if (!is_conditional(e)) return;
    if (config.fixed_bandwidth) {
      bw[job] = config.fixed_bandwidth;
      return;
    }
    const Index i = first + static_cast<Index>((job % blocks) * static_cast<std::size_t>(config.cv_every));
    try {
      const DesignSet view = view_at(i);
      bw[job] = cv_bandwidth(view.head(training_rows(view, i)), e, config, &bw_warn[job]);
    } catch (const Error& ex) {
      bw_error[job] = ex.what();
    }
  });

  std::vector<OriginCell> cells(E * n_origins);
  parallel_for(cells.size(), [&](std::size_t job) {
    const std::size_t ei = job / n_origins, k = job % n_origins;
    const Estimator e = config.estimators[ei];
    const Index i = first + static_cast<Index>(k);
    const std::size_t b = ei * blocks + k / static_cast<std::size_t>(config.cv_every);
    OriginCell& cell = cells[job];
    if (is_conditional(e) && !bw[b]) {
      cell.error = "bandwidth selection failed: " + bw_error[b];
      return;
    }
    try {
      cell = detail::forecast_cell(view_at(i), i, e, bw[b], config);
      cell.density.realization = design.target[i];
      cell.scores = quantile_scores(cell.density);
      cell.pit = pit_value(cell.density);
      cell.ok = true;
    } catch (const Error& ex) {
      cell = OriginCell{};
      cell.error = ex.what();
    }
  });

  for (std::size_t ei = 0; ei < E; ++ei) {
    EstimatorRun run;
    run.estimator = config.estimators[ei];
    run.cells.assign(cells.begin() + static_cast<std::ptrdiff_t>(ei * n_origins),
                     cells.begin() + static_cast<std::ptrdiff_t>((ei + 1) * n_origins));
    for (std::size_t b = 0; b < blocks; ++b)
      for (const auto& w : bw_warn[ei * blocks + b]) run.warnings.push_back(w);
    for (std::size_t k = 0; k < n_origins; ++k) {
      if (run.cells[k].ok) continue;
      ++run.missing;
      run.warnings.push_back(res.origins[k].str() + ": " + run.cells[k].error);
    }
    run.valid = run.missing * 10 <= static_cast<int>(n_origins);
    res.runs.push_back(std::move(run));
  }

  if (config.insample) {
    parallel_for(E, [&](std::size_t ei) {
      auto& run = res.runs[ei];
      try {
        BandwidthSpec spec = BandwidthSpec::from_percent(50);
        if (is_conditional(run.estimator)) {
          spec = config.fixed_bandwidth ? *config.fixed_bandwidth : cv_bandwidth(design, run.estimator, config);
          run.insample_bandwidth = spec;
        }
        const auto cube = fit_estimator(run.estimator, design, config.taus, config.grid, spec);
        const Eigen::MatrixXd fitted = fitted_quantiles(cube, design);
        for (std::size_t q = 0; q < config.taus.size(); ++q) {
          InsampleFit f;
          f.tau = config.taus[q];
          try {
            const auto r2 = pseudo_r2(design.target, fitted.col(static_cast<Index>(q)), f.tau);
            f.pseudo_r2 = r2.value;
            f.rasw = r2.rasw;
            f.tasw = r2.tasw;
            f.degenerate = r2.degenerate;
          } catch (const Error& ex) {
            f.degenerate = true;
            run.warnings.push_back("in-sample tau " + format_double(f.tau) + ": " + ex.what());
          }
          run.insample.push_back(f);
        }
      } catch (const Error& ex) {
        run.warnings.push_back(std::string("in-sample fit failed: ") + ex.what());
      }
    });
  }

  res.bands = pit_bands(static_cast<Index>(std::max<std::size_t>(n_origins, 10)), config.pit_level, config.pit_draws,
                        config.seed);
  res.summary = backtest_summary(res);
  return res;
}

inline const EstimatorRun* find_run(const BacktestResult& r, Estimator e) {
  for (const auto& run : r.runs)
    if (run.estimator == e) return &run;
  return nullptr;
}

/// Table-2 layout: per estimator and weight scheme, the mean qwCRPS and a
/// Diebold-Mariano comparison against QAR(2) on the origins both scored.
inline Json backtest_summary(const BacktestResult& r) {
  Json s;
  s["horizon"] = r.horizon;
  s["initial_window"] = r.config.initial_window;
  s["origins"] = r.origins.size();
  s["first_origin"] = r.origins.empty() ? "" : r.origins.front().str();
  s["last_origin"] = r.origins.empty() ? "" : r.origins.back().str();
  s["taus"] = r.config.taus;
  Json schemes = Json::array();
  for (auto w : all_schemes()) schemes.push_back(to_string(w));
  s["schemes"] = schemes;
  const EstimatorRun* ref = find_run(r, Estimator::qar2);
  s["reference"] = ref ? Json("qar2") : Json(nullptr);
  s["significance_codes"] = {{"*", 0.10}, {"**", 0.05}, {"***", 0.01}};

  Json table = Json::object(), status = Json::object();
  for (const auto& run : r.runs) {
    const std::string name = to_string(run.estimator);
    status[name] = {{"missing", run.missing}, {"valid", run.valid}, {"warnings", run.warnings}};
    Json row = Json::object();
    for (auto w : all_schemes()) {
      Json cell;
      std::vector<double> loss(run.cells.size(), kMissing);
      for (std::size_t k = 0; k < run.cells.size(); ++k)
        if (run.cells[k].ok) {
          Eigen::MatrixXd one = run.cells[k].scores.transpose();
          loss[k] = qwcrps(one, r.config.taus, w).mean;
        }
      double sum = 0.0;
      int n = 0;
      for (double v : loss)
        if (!is_missing(v)) sum += v, ++n;
      cell["mean"] = n > 0 ? Json(sum / n) : Json(nullptr);
      cell["scored"] = n;
      if (ref && ref != &run) {
        std::vector<double> a, b;
        for (std::size_t k = 0; k < run.cells.size(); ++k)
          if (run.cells[k].ok && ref->cells[k].ok) {
            a.push_back(loss[k]);
            Eigen::MatrixXd one = ref->cells[k].scores.transpose();
            b.push_back(qwcrps(one, r.config.taus, w).mean);
          }
        try {
          const auto dm = dm_test(Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Index>(a.size())),
                                  Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Index>(b.size())), r.horizon);
          cell["dm_statistic"] = dm.statistic;
          cell["p_value"] = dm.p_value;
          cell["stars"] = stars(dm.p_value);
        } catch (const Error& ex) {
          cell["dm_statistic"] = nullptr;
          cell["p_value"] = nullptr;
          cell["stars"] = "";
          cell["note"] = ex.what();
        }
      }
      row[to_string(w)] = cell;
    }
    table[name] = row;
  }
  s["qwcrps"] = table;
  s["status"] = status;
  return s;
}

// ---------------------------------------------------------------------------
// Run directory

inline std::string densities_csv(const BacktestResult& r) {
  std::ostringstream o;
  o << "estimator,origin,tau,raw,rearranged,realization,quantile_score,grid_index,bandwidth,status\n";
  for (const auto& run : r.runs) {
    for (std::size_t k = 0; k < run.cells.size(); ++k) {
      const auto& c = run.cells[k];
      for (std::size_t q = 0; q < r.config.taus.size(); ++q) {
        const auto qi = static_cast<Index>(q);
        o << to_string(run.estimator) << ',' << r.origins[k].str() << ',' << format_double(r.config.taus[q]) << ',';
        if (c.ok) {
          o << format_double(c.density.raw[qi]) << ',' << format_double(c.density.rearranged[qi]) << ','
            << format_double(c.density.realization) << ',' << format_double(c.scores[qi]) << ',' << c.density.grid_index
            << ',' << (c.bandwidth ? format_double(c.bandwidth->fraction()) : "") << ",ok\n";
        } else {
          o << ",,,,,,missing\n";
        }
      }
    }
  }
  return o.str();
}

inline std::string scores_csv(const BacktestResult& r) {
  std::ostringstream o;
  o << "estimator,origin";
  for (auto w : all_schemes()) o << ',' << to_string(w);
  o << '\n';
  for (const auto& run : r.runs) {
    for (std::size_t k = 0; k < run.cells.size(); ++k) {
      o << to_string(run.estimator) << ',' << r.origins[k].str();
      for (auto w : all_schemes()) {
        o << ',';
        if (run.cells[k].ok) {
          Eigen::MatrixXd one = run.cells[k].scores.transpose();
          o << format_double(qwcrps(one, r.config.taus, w).mean);
        }
      }
      o << '\n';
    }
  }
  return o.str();
}

inline std::string pits_csv(const BacktestResult& r) {
  std::ostringstream o;
  o << "estimator,origin,pit\n";
  for (const auto& run : r.runs)
    for (std::size_t k = 0; k < run.cells.size(); ++k)
      o << to_string(run.estimator) << ',' << r.origins[k].str() << ','
        << (run.cells[k].ok ? format_double(run.cells[k].pit) : "") << '\n';
  return o.str();
}

inline std::string bands_csv(const PitBands& b) {
  std::ostringstream o;
  o << "r,band_lo,band_hi\n";
  for (Index i = 0; i < b.r.size(); ++i)
    o << format_double(b.r[i]) << ',' << format_double(b.lo[i]) << ',' << format_double(b.hi[i]) << '\n';
  return o.str();
}

inline std::string insample_csv(const BacktestResult& r) {
  std::ostringstream o;
  o << "estimator,tau,pseudo_r2,rasw,tasw,degenerate,bandwidth\n";
  for (const auto& run : r.runs)
    for (const auto& f : run.insample)
      o << to_string(run.estimator) << ',' << format_double(f.tau) << ',' << format_double(f.pseudo_r2) << ','
        << format_double(f.rasw) << ',' << format_double(f.tasw) << ',' << (f.degenerate ? 1 : 0) << ','
        << (run.insample_bandwidth ? format_double(run.insample_bandwidth->fraction()) : "") << '\n';
  return o.str();
}

inline Json config_json(const BacktestConfig& c, int horizon) {
  Json j;
  j["horizon"] = horizon;
  j["initial_window"] = c.initial_window;
  j["taus"] = c.taus;
  j["grid"] = c.grid.points();
  Json est = Json::array();
  for (auto e : c.estimators) est.push_back(to_string(e));
  j["estimators"] = est;
  j["bandwidth"] = c.fixed_bandwidth ? Json(c.fixed_bandwidth->fraction()) : Json("cv");
  j["cv_every"] = c.cv_every;
  j["holdout_percent"] = c.holdout_percent;
  j["seed"] = c.seed;
  j["pit_draws"] = c.pit_draws;
  j["pit_level"] = c.pit_level;
  j["insample"] = c.insample;
  return j;
}

/// Writes densities.csv, scores.csv, pits.csv, pit_bands.csv, insample.csv
/// and summary.json under dir.
inline void write_run(const std::filesystem::path& dir, const BacktestResult& r) {
  std::filesystem::create_directories(dir);
  write_text(dir / "densities.csv", densities_csv(r));
  write_text(dir / "scores.csv", scores_csv(r));
  write_text(dir / "pits.csv", pits_csv(r));
  write_text(dir / "pit_bands.csv", bands_csv(r.bands));
  write_text(dir / "insample.csv", insample_csv(r));
  Json summary = r.summary;
  summary["config"] = config_json(r.config, r.horizon);
  summary["pit_band_radius"] = r.bands.radius;
  summary["pit_band_label"] = r.bands.label;
  write_text(dir / "summary.json", dump_json(summary));
}

}  // namespace iar
