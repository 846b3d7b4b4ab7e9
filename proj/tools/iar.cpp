// iar: batch command line over the library. Every command writes tidy CSV/JSON
// for an external plotting tool.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/version.hpp>

#include "iar/iar.hpp"
#include "iar/fred.hpp"

namespace fs = std::filesystem;
using iar::Error;
using iar::ErrorKind;
using iar::Json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Flag parsing helpers

std::vector<double> check_taus(const std::vector<double>& taus) {
  if (taus.empty()) throw UsageError("--taus needs at least one value");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] < 1.0)) throw UsageError("--taus values must lie in (0, 1)");
    if (i > 0 && !(taus[i] > taus[i - 1])) throw UsageError("--taus must be strictly increasing");
  }
  return taus;
}

iar::ConditioningGrid make_grid(const std::vector<double>& points) {
  if (points.empty()) return iar::default_grid();
  try {
    return iar::ConditioningGrid(points);
  } catch (const Error& e) {
    throw UsageError(std::string("--grid: ") + e.what());
  }
}

/// "cv" (or empty) means cross-validate.
std::optional<iar::BandwidthSpec> parse_bandwidth(const std::string& s) {
  if (s.empty() || s == "cv") return std::nullopt;
  double f = 0.0;
  try {
    f = iar::parse_double_exact(s);
  } catch (const Error&) {
    throw UsageError("--bandwidth must be 'cv' or a fraction in 0.10, 0.15, ..., 0.90 (got '" + s + "')");
  }
  try {
    return iar::BandwidthSpec::from_fraction(f);
  } catch (const Error& e) {
    throw UsageError(std::string("--bandwidth: ") + e.what());
  }
}

iar::Estimator parse_estimator_flag(const std::string& s) {
  auto e = iar::parse_estimator(s);
  if (!e) throw UsageError("unknown estimator '" + s + "'");
  return *e;
}

iar::MomentumTiming parse_timing(const std::string& s) {
  if (s == "current") return iar::MomentumTiming::current;
  if (s == "lagged") return iar::MomentumTiming::lagged;
  throw UsageError("--momentum-timing must be current or lagged");
}

std::string first_line(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  return line;
}

/// FRED codes when the header has them all, canonical role names when it has
/// those, otherwise FRED (so the schema error names the missing code).
iar::Schema detect_schema(const std::string& path) {
  const auto cols = iar::detail::split_csv_line(first_line(path));
  const std::set<std::string> have(cols.begin(), cols.end());
  auto covers = [&](const iar::Schema& s) {
    for (const auto& [role, name] : s)
      if (!have.count(name)) return false;
    return true;
  };
  if (covers(iar::fred_schema())) return iar::fred_schema();
  if (covers(iar::canonical_schema())) return iar::canonical_schema();
  return iar::fred_schema();
}

struct DataArgs {
  std::string path;
  int horizon = 1;
  std::string timing = "current";
};

void add_data_flags(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.path, "input CSV (FRED codes or canonical column names)")
      ->required();
  cmd->add_option("--horizon", a.horizon, "forecast horizon in quarters")->check(CLI::IsMember({1, 4}));
  cmd->add_option("--momentum-timing", a.timing, "current: y_t - y_{t-1}; lagged: y_{t-1} - y_{t-2}")
      ->check(CLI::IsMember({"current", "lagged"}));
}

struct Loaded {
  iar::ObservationFrame frame;
  iar::DesignSet design;
};

Loaded load(const DataArgs& a) {
  Loaded l;
  l.frame = iar::load_csv(a.path, detect_schema(a.path));
  iar::DesignOptions o;
  o.timing = parse_timing(a.timing);
  l.design = iar::build_design(l.frame, a.horizon, o);
  return l;
}

Json data_info(const DataArgs& a, const iar::DesignSet& d) {
  Json j;
  j["path"] = a.path;
  j["horizon"] = a.horizon;
  j["momentum_timing"] = a.timing;
  j["rows"] = d.rows();
  j["dropped_rows"] = d.dropped;
  j["first_origin"] = d.origin_dates.front().str();
  j["last_origin"] = d.origin_dates.back().str();
  return j;
}

Json manifest(const std::string& command, const Json& args) {
  Json j;
  j["tool"] = "iar";
  j["version"] = IAR_VERSION;
  j["command"] = command;
  j["arguments"] = args;
  j["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"boost", BOOST_LIB_VERSION},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                    {"cli11", CLI11_VERSION}};
  return j;
}

// Wall-clock numbers go to their own file so every other output is
// byte-reproducible.
void write_timings(const fs::path& dir, std::chrono::steady_clock::time_point start) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json j;
  j["seconds"] = s;
  j["jobs"] = iar::default_jobs();
  iar::write_text(dir / "timings.json", iar::dump_json(j));
}

Json losses_json(const iar::LossTable& t) {
  Json j = Json::object();
  for (const auto& [spec, loss] : t) {
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", spec.fraction());
    j[key] = std::isfinite(loss) ? Json(loss) : Json(nullptr);
  }
  return j;
}

/// CV over the whole design for one conditional estimator.
iar::BandwidthSpec cross_validate(const iar::DesignSet& d, const std::vector<double>& taus,
                                  const iar::ConditioningGrid& grid, iar::Estimator e, Json& log) {
  iar::CvOptions o;
  o.estimator = e;
  const auto cv = iar::cv_losses(d, taus, grid, iar::bandwidth_candidates(), o);
  const auto best = iar::select_bandwidth(cv.losses);
  log["estimator"] = iar::to_string(e);
  log["selected"] = best.fraction();
  log["holdout"] = cv.holdout;
  log["losses"] = losses_json(cv.losses);
  log["warnings"] = cv.warnings;
  return best;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  DataArgs data;
  std::string estimator = "cpqr";
  std::vector<double> taus = iar::default_taus();
  std::vector<double> grid;
  bool no_noncrossing = false;
  std::string bandwidth = "cv";
  std::string out;
};

int cmd_fit(const FitArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  auto e = parse_estimator_flag(a.estimator);
  if (e == iar::Estimator::cpqr_free) throw UsageError("use --estimator cpqr --no-noncrossing");
  if (a.no_noncrossing) {
    if (e != iar::Estimator::cpqr) throw UsageError("--no-noncrossing applies to cpqr only");
    e = iar::Estimator::cpqr_free;
  }
  const auto taus = check_taus(a.taus);
  const auto grid = make_grid(a.grid);
  auto bw = parse_bandwidth(a.bandwidth);
  if (bw && !iar::is_conditional(e)) throw UsageError("--bandwidth applies to cpqr and cqr only");

  const auto l = load(a.data);
  Json cv = nullptr;
  if (iar::is_conditional(e) && !bw) {
    cv = Json::object();
    bw = cross_validate(l.design, taus, grid, e, cv);
  }
  const auto cube = iar::fit_estimator(e, l.design, taus, grid, bw.value_or(iar::BandwidthSpec{}));

  Json extra;
  extra["data"] = data_info(a.data, l.design);
  extra["cross_validation"] = cv;
  const fs::path out(a.out);
  iar::save_cube(out, "coefficients", cube, extra);
  Json args;
  args["estimator"] = iar::to_string(e);
  args["taus"] = taus;
  args["grid"] = grid.points();
  args["bandwidth"] = a.bandwidth;
  iar::write_text(out / "manifest.json", iar::dump_json(manifest("fit", args)));
  write_timings(out, start);
  for (const auto& w : cube.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// backtest

struct BacktestArgs {
  DataArgs data;
  std::vector<std::string> estimators{"qar2", "cpqr"};
  std::vector<double> taus = iar::default_taus();
  std::vector<double> grid;
  long initial_window = 100;
  std::string bandwidth = "cv";
  int cv_every = 8;
  int holdout_percent = 10;
  std::uint64_t seed = 1;
  int pit_draws = 2000;
  bool no_insample = false;
  bool poison_future = false;
  std::string out;
};

int cmd_backtest(const BacktestArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  iar::BacktestConfig c;
  c.estimators.clear();
  for (const auto& s : a.estimators) c.estimators.push_back(parse_estimator_flag(s));
  c.taus = check_taus(a.taus);
  c.grid = make_grid(a.grid);
  c.initial_window = a.initial_window;
  c.fixed_bandwidth = parse_bandwidth(a.bandwidth);
  if (a.cv_every < 1) throw UsageError("--cv-every must be positive");
  c.cv_every = a.cv_every;
  c.holdout_percent = a.holdout_percent;
  c.seed = a.seed;
  c.pit_draws = a.pit_draws;
  c.insample = !a.no_insample;
  c.poison_future = a.poison_future;

  const auto l = load(a.data);
  iar::validate(c, l.design);
  const auto r = iar::run_backtest(l.design, c);
  const fs::path out(a.out);
  iar::write_run(out, r);
  Json args = iar::config_json(c, a.data.horizon);
  args["poison_future"] = c.poison_future;
  Json m = manifest("backtest", args);
  m["seed"] = c.seed;
  m["data"] = data_info(a.data, l.design);
  iar::write_text(out / "manifest.json", iar::dump_json(m));
  write_timings(out, start);
  for (const auto& run : r.runs)
    for (const auto& w : run.warnings) std::cerr << "warning: " << iar::to_string(run.estimator) << ": " << w << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// hausman

struct HausmanArgs {
  DataArgs data;
  std::vector<double> taus = iar::default_taus();
  std::vector<double> grid;
  int replicates = 500;
  long block_length = 0;  // 0: ceil(T^(1/3))
  double level = 0.05;
  std::uint64_t seed = 1;
  std::string bandwidth = "cv";
  std::string reference = "scaled";
  std::string out;
};

int cmd_hausman(const HausmanArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  if (a.replicates < 50) throw UsageError("--replicates must be at least 50");
  if (a.block_length < 0) throw UsageError("--block-length must be positive");
  if (!(a.level > 0.0 && a.level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  const auto taus = check_taus(a.taus);
  const auto grid = make_grid(a.grid);
  const auto fixed = parse_bandwidth(a.bandwidth);
  const auto ref = a.reference == "chi-square" ? iar::HausmanReference::chi_square : iar::HausmanReference::scaled;

  const auto l = load(a.data);
  const auto& d = l.design;
  const iar::Index L = a.block_length > 0 ? a.block_length : iar::default_block_length(d.rows());
  if (L > d.rows()) throw UsageError("--block-length exceeds the number of design rows");

  // CQR gets its own cross-validated bandwidth; both stay fixed across replicates.
  Json cv = Json::object();
  iar::BandwidthSpec bw_cpqr, bw_cqr;
  if (fixed) {
    bw_cpqr = bw_cqr = *fixed;
  } else {
    Json a1, a2;
    bw_cpqr = cross_validate(d, taus, grid, iar::Estimator::cpqr, a1);
    bw_cqr = cross_validate(d, taus, grid, iar::Estimator::cqr, a2);
    cv["cpqr"] = a1;
    cv["cqr"] = a2;
  }

  auto estimate = [&](iar::FitFn fit) {
    iar::Estimate est{fit(d), iar::block_bootstrap(d, fit, a.replicates, L, a.seed)};
    return est;
  };
  const auto cpqr = estimate([&](const iar::DesignSet& s) { return iar::fit_cpqr(s, taus, grid, bw_cpqr, true); });
  const auto cqr = estimate([&](const iar::DesignSet& s) { return iar::fit_cqr(s, taus, grid, bw_cqr); });
  const auto qar2 = estimate([&](const iar::DesignSet& s) { return iar::fit_qar(s, taus, 2, false); });
  const auto maps = iar::hausman_maps(cpqr, cqr, qar2, a.level, ref);

  const fs::path out(a.out);
  fs::create_directories(out);
  std::vector<std::string> covariates;
  for (const auto& c : maps.cells)
    if (std::find(covariates.begin(), covariates.end(), c.covariate) == covariates.end())
      covariates.push_back(c.covariate);
  Json rates = Json::object();
  for (const auto& cov : covariates) {
    for (const std::string axis : {"quantile", "momentum"}) {
      const auto cells = maps.select(cov, axis);
      std::ostringstream s;
      iar::write_maps(s, cells);
      iar::write_text(out / (cov + "_" + axis + "_map.csv"), s.str());
      int ones = 0;
      for (const auto& c : cells) ones += c.decision;
      rates[cov][axis] = static_cast<double>(ones) / static_cast<double>(cells.size());
    }
  }
  std::ostringstream all;
  iar::write_maps(all, maps.cells);
  iar::write_text(out / "maps.csv", all.str());
  iar::save_cube(out, "cpqr", cpqr.cube);
  iar::save_cube(out, "cqr", cqr.cube);
  iar::save_cube(out, "qar2", qar2.cube);

  Json j;
  j["caveat"] = maps.caveat;
  j["level"] = maps.level;
  j["reference"] = iar::to_string(maps.reference);
  j["replicates"] = a.replicates;
  j["block_length"] = L;
  j["seed"] = a.seed;
  j["bandwidth"] = {{"cpqr", bw_cpqr.fraction()}, {"cqr", bw_cqr.fraction()}};
  j["cross_validation"] = fixed ? Json(nullptr) : cv;
  Json dropped;
  dropped["cpqr"] = cpqr.ensemble.dropped;
  dropped["cqr"] = cqr.ensemble.dropped;
  dropped["qar2"] = qar2.ensemble.dropped;
  j["dropped_replicates"] = dropped;
  j["rejection_rate"] = rates;
  j["data"] = data_info(a.data, d);
  iar::write_text(out / "maps.json", iar::dump_json(j));

  Json args;
  args["taus"] = taus;
  args["grid"] = grid.points();
  args["replicates"] = a.replicates;
  args["block_length"] = L;
  args["level"] = a.level;
  args["bandwidth"] = a.bandwidth;
  args["reference"] = a.reference;
  Json m = manifest("hausman", args);
  m["seed"] = a.seed;
  iar::write_text(out / "manifest.json", iar::dump_json(m));
  write_timings(out, start);
  for (const auto* e : {&cpqr, &cqr, &qar2})
    for (const auto& w : e->ensemble.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string run;
  std::string relative_to;
  std::string out;
  std::vector<double> fan_taus{0.05, 0.5, 0.95};
};

iar::CsvTable artifact(const fs::path& run, const std::string& name) {
  const auto p = run / name;
  if (!fs::exists(p)) throw Error(ErrorKind::io, "missing run artifact " + p.string());
  return iar::read_csv_table(p);
}

/// Linear interpolation of sorted quantiles at tau; nullopt outside the range.
std::optional<double> interpolate(const std::vector<double>& taus, const std::vector<double>& q, double tau) {
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (std::abs(taus[i] - tau) < 1e-12) return q[i];
    if (i + 1 < taus.size() && taus[i] < tau && tau < taus[i + 1]) {
      const double w = (tau - taus[i]) / (taus[i + 1] - taus[i]);
      return (1.0 - w) * q[i] + w * q[i + 1];
    }
  }
  return std::nullopt;
}

int cmd_report(const ReportArgs& a) {
  const fs::path run(a.run);
  if (!fs::is_directory(run)) throw Error(ErrorKind::io, "run directory not found: " + run.string());
  const auto insample = artifact(run, "insample.csv");
  const auto densities = artifact(run, "densities.csv");
  const auto pits = artifact(run, "pits.csv");
  const auto bands = artifact(run, "pit_bands.csv");
  const fs::path out = a.out.empty() ? run / "report" : fs::path(a.out);
  fs::create_directories(out);

  // Estimators in first-appearance order.
  std::vector<std::string> names;
  auto note = [&](const std::string& n) {
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  };
  for (const auto& r : densities.rows) note(r[densities.column("estimator")]);

  // Pseudo R^2 curves.
  {
    const auto ce = insample.column("estimator"), ct = insample.column("tau"), cr = insample.column("pseudo_r2");
    std::map<std::string, double> ref;
    if (!a.relative_to.empty()) {
      for (const auto& r : insample.rows)
        if (r[ce] == a.relative_to) ref[r[ct]] = iar::parse_double_exact(r[cr]);
      if (ref.empty()) throw Error(ErrorKind::invalid_argument, "--relative-to " + a.relative_to + " is not in this run");
    }
    std::ostringstream o;
    o << "estimator,tau,pseudo_r2";
    if (!ref.empty()) o << ",relative_to_" << a.relative_to;
    o << '\n';
    for (const auto& r : insample.rows) {
      o << r[ce] << ',' << r[ct] << ',' << r[cr];
      if (!ref.empty()) {
        const auto it = ref.find(r[ct]);
        o << ',';
        if (it != ref.end() && !r[cr].empty()) o << iar::format_double(iar::parse_double_exact(r[cr]) - it->second);
      }
      o << '\n';
    }
    iar::write_text(out / "pseudo_r2.csv", o.str());
  }

  // Fan chart: rearranged out-of-sample quantiles at the fan taus.
  {
    const auto ce = densities.column("estimator"), co = densities.column("origin"), ct = densities.column("tau"),
               cq = densities.column("rearranged"), cy = densities.column("realization"),
               cs = densities.column("status");
    std::ostringstream o;
    o << "estimator,origin,tau,quantile,realization\n";
    std::size_t i = 0;
    const auto& rows = densities.rows;
    while (i < rows.size()) {
      std::size_t j = i;
      std::vector<double> taus, qs;
      while (j < rows.size() && rows[j][ce] == rows[i][ce] && rows[j][co] == rows[i][co]) {
        taus.push_back(iar::parse_double_exact(rows[j][ct]));
        qs.push_back(iar::parse_double_exact(rows[j][cq]));
        ++j;
      }
      if (rows[i][cs] == "ok") {
        for (double t : a.fan_taus) {
          const auto v = interpolate(taus, qs, t);
          if (v)
            o << rows[i][ce] << ',' << rows[i][co] << ',' << iar::format_double(t) << ',' << iar::format_double(*v)
              << ',' << rows[i][cy] << '\n';
        }
      }
      i = j;
    }
    iar::write_text(out / "fan.csv", o.str());
  }

  // PIT CDFs on the band grid.
  {
    const auto cr = bands.column("r"), clo = bands.column("band_lo"), chi = bands.column("band_hi");
    Eigen::VectorXd r(static_cast<iar::Index>(bands.rows.size()));
    for (std::size_t i = 0; i < bands.rows.size(); ++i) r[static_cast<iar::Index>(i)] = iar::parse_double_exact(bands.rows[i][cr]);
    const auto ce = pits.column("estimator"), cp = pits.column("pit");
    std::ostringstream o;
    o << "estimator,r,cdf,band_lo,band_hi\n";
    for (const auto& n : names) {
      std::vector<double> u;
      for (const auto& row : pits.rows)
        if (row[ce] == n && !row[cp].empty()) u.push_back(iar::parse_double_exact(row[cp]));
      const auto cdf = iar::pit_cdf(u, r);
      for (std::size_t i = 0; i < bands.rows.size(); ++i)
        o << n << ',' << bands.rows[i][cr] << ',' << iar::format_double(cdf[static_cast<iar::Index>(i)]) << ','
          << bands.rows[i][clo] << ',' << bands.rows[i][chi] << '\n';
    }
    iar::write_text(out / "pit_cdf.csv", o.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// fetch and synth

struct FetchArgs {
  std::vector<std::string> codes = iar::table_codes();
  std::string cache_dir;
  bool offline = false;
  bool refresh = false;
  std::string start, end;
  std::string out;
};

std::optional<iar::Quarter> quarter_flag(const std::string& flag, const std::string& s) {
  if (s.empty()) return std::nullopt;
  auto q = iar::Quarter::parse(s);
  if (!q) throw UsageError(flag + " must look like 1973Q1");
  return q;
}

int cmd_fetch(const FetchArgs& a) {
  iar::FetchOptions o;
  if (!a.cache_dir.empty()) {
    o.cache_dir = a.cache_dir;
  } else if (const char* env = std::getenv("IAR_CACHE_DIR"); env && *env) {
    o.cache_dir = env;
  }
  o.offline = a.offline;
  o.refresh = a.refresh;
  const auto start = quarter_flag("--start", a.start), end = quarter_flag("--end", a.end);
  for (const auto& p : iar::fetch_fred(a.codes, o)) std::cout << p.string() << '\n';
  if (!a.out.empty()) iar::write_text(a.out, iar::merge_fred(a.codes, o, start, end));
  return 0;
}

struct SynthArgs {
  std::string dgp = "location-shift";
  long T = 400;
  std::uint64_t seed = 1;
  double sigma = 0.75;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  iar::SyntheticSpec s;
  s.dgp = *iar::parse_dgp(a.dgp);
  s.T = a.T;
  s.seed = a.seed;
  s.sigma = a.sigma;
  const auto f = iar::generate_synthetic(s);
  std::ostringstream o;
  iar::write_frame(o, f);
  iar::write_text(a.out, o.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inflation-at-risk toolkit: conditional quantile fits, backtests, Hausman maps"};
  app.set_config("--config", "", "key=value defaults file; command line flags win");
  unsigned jobs = 0;
  app.add_option("--jobs", jobs, "worker threads, 0 = all cores (results do not depend on it)");
  app.require_subcommand(1);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit one estimator and write its coefficient cube");
  add_data_flags(f, fit.data);
  f->add_option("--estimator", fit.estimator, "cpqr, cqr, qar1, qar2, ncqar1 or ncqar2");
  f->add_option("--taus", fit.taus, "quantile levels")->delimiter(',');
  f->add_option("--grid", fit.grid, "momentum grid (default -2:0.2:2)")->delimiter(',');
  f->add_flag("--no-noncrossing", fit.no_noncrossing, "cpqr without non-crossing constraints");
  f->add_option("--bandwidth", fit.bandwidth, "cv or a fraction in 0.10..0.90");
  f->add_option("--out", fit.out, "output directory")->required();

  BacktestArgs bt;
  auto* b = app.add_subcommand("backtest", "expanding-window out-of-sample evaluation");
  add_data_flags(b, bt.data);
  b->add_option("--estimators", bt.estimators, "estimators to compare")->delimiter(',');
  b->add_option("--taus", bt.taus, "quantile levels")->delimiter(',');
  b->add_option("--grid", bt.grid, "momentum grid")->delimiter(',');
  b->add_option("--initial-window", bt.initial_window, "training rows at the first origin");
  b->add_option("--bandwidth", bt.bandwidth, "cv or a fixed fraction");
  b->add_option("--cv-every", bt.cv_every, "origins between bandwidth re-selections");
  b->add_option("--holdout-percent", bt.holdout_percent, "cross-validation holdout share");
  b->add_option("--seed", bt.seed, "seed for the PIT band simulation");
  b->add_option("--pit-draws", bt.pit_draws, "Monte Carlo draws for the PIT bands");
  b->add_flag("--no-insample", bt.no_insample, "skip the in-sample pseudo R2 fits");
  b->add_flag("--poison-future", bt.poison_future, "overwrite data unavailable at each origin (leak check)");
  b->add_option("--out", bt.out, "run directory")->required();

  HausmanArgs hs;
  auto* h = app.add_subcommand("hausman", "bootstrap Hausman decision maps");
  add_data_flags(h, hs.data);
  h->add_option("--taus", hs.taus, "quantile levels")->delimiter(',');
  h->add_option("--grid", hs.grid, "momentum grid")->delimiter(',');
  h->add_option("--replicates", hs.replicates, "bootstrap replicates (at least 50)");
  h->add_option("--block-length", hs.block_length, "circular block length (default ceil(T^(1/3)))");
  h->add_option("--level", hs.level, "test level");
  h->add_option("--seed", hs.seed, "bootstrap seed");
  h->add_option("--bandwidth", hs.bandwidth, "cv or a fixed fraction for both cpqr and cqr");
  h->add_option("--reference", hs.reference, "null distribution")->check(CLI::IsMember({"scaled", "chi-square"}));
  h->add_option("--out", hs.out, "output directory")->required();

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "plot data from a backtest run");
  r->add_option("--run", rp.run, "backtest run directory")->required();
  r->add_option("--relative-to", rp.relative_to, "estimator whose pseudo R2 is subtracted");
  r->add_option("--out", rp.out, "output directory (default <run>/report)");

  FetchArgs fe;
  auto* fc = app.add_subcommand("fetch", "download FRED series into the cache ($IAR_CACHE_DIR)");
  fc->add_option("--codes", fe.codes, "FRED codes")->delimiter(',');
  fc->add_option("--cache-dir", fe.cache_dir, "cache directory (overrides IAR_CACHE_DIR)");
  fc->add_flag("--offline", fe.offline, "use the cache only");
  fc->add_flag("--refresh", fe.refresh, "download even when cached");
  fc->add_option("--start", fe.start, "first quarter of the merged file");
  fc->add_option("--end", fe.end, "last quarter of the merged file");
  fc->add_option("--out", fe.out, "merged CSV path");

  SynthArgs sy;
  auto* s = app.add_subcommand("synth", "write a synthetic data set");
  s->add_option("--dgp", sy.dgp, "design")
      ->check(CLI::IsMember({"location-shift", "two-regime-slope", "momentum-free", "heteroskedastic"}));
  s->add_option("--T", sy.T, "rows");
  s->add_option("--seed", sy.seed, "seed");
  s->add_option("--sigma", sy.sigma, "noise scale");
  s->add_option("--out", sy.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    iar::set_default_jobs(jobs);
    if (*f) return cmd_fit(fit);
    if (*b) return cmd_backtest(bt);
    if (*h) return cmd_hausman(hs);
    if (*r) return cmd_report(rp);
    if (*fc) return cmd_fetch(fe);
    if (*s) return cmd_synth(sy);
  } catch (const UsageError& e) {
    std::cerr << "iar: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "iar: " << e.what() << '\n';
    return e.kind() == ErrorKind::invalid_argument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "iar: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
