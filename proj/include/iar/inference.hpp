#pragma once

// Circular block bootstrap and Hausman comparisons of CPQR against CQR
// (variation along quantiles) and QAR(2) (variation along momentum).

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "iar/dataprep.hpp"
#include "iar/error.hpp"
#include "iar/estimators.hpp"
#include "iar/parallel.hpp"

namespace iar {

inline constexpr const char* kBootstrapCaveat =
    "bootstrap variances may be too narrow; read the maps as guidance";

inline Index default_block_length(Index T) {
  if (T < 1) throw Error(ErrorKind::invalid_argument, "block length needs T >= 1");
  Index b = static_cast<Index>(std::cbrt(static_cast<double>(T)));
  while (b * b * b < T) ++b;
  while (b > 1 && (b - 1) * (b - 1) * (b - 1) >= T) --b;
  return b;
}

/// Row indices of one circular block resample of length T.
inline std::vector<Index> circular_block_rows(Index T, Index block_length, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> start(0, T - 1);
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(T));
  while (static_cast<Index>(rows.size()) < T) {
    const Index s = start(rng);
    for (Index j = 0; j < block_length && static_cast<Index>(rows.size()) < T; ++j) rows.push_back((s + j) % T);
  }
  return rows;
}

/// Independent generator for replicate b.
inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::size_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(static_cast<std::uint64_t>(b) >> 32)};
  return std::mt19937_64(seq);
}

struct BootstrapEnsemble {
  std::vector<CoefficientCube> replicates;
  std::vector<std::size_t> ids;  // replicate number of each survivor
  Index block_length = 1;
  std::uint64_t seed = 0;
  int requested = 0;
  int dropped = 0;
  std::vector<std::string> warnings;
};

using FitFn = std::function<CoefficientCube(const DesignSet&)>;

/// Refits `fit` on B circular block resamples of the design rows. Failed
/// replicates are dropped; more than 20% dropped is an error.
inline BootstrapEnsemble block_bootstrap(const DesignSet& design, const FitFn& fit, int B, Index block_length,
                                         std::uint64_t seed) {
  if (B < 2) throw Error(ErrorKind::invalid_argument, "bootstrap needs at least 2 replicates");
  if (block_length < 1) throw Error(ErrorKind::invalid_argument, "block length must be at least 1");
  const Index T = design.rows();
  if (T < 2) throw Error(ErrorKind::insufficient_data, "bootstrap needs at least 2 design rows");

  std::vector<std::optional<CoefficientCube>> out(static_cast<std::size_t>(B));
  std::vector<std::string> failures(out.size());
  parallel_for(out.size(), [&](std::size_t b) {
    auto rng = replicate_rng(seed, b);
    const auto rows = circular_block_rows(T, std::min(block_length, T), rng);
    try {
      out[b] = fit(design.select(rows));
    } catch (const Error& e) {
      failures[b] = e.what();
    }
  });

  BootstrapEnsemble ens;
  ens.block_length = block_length;
  ens.seed = seed;
  ens.requested = B;
  for (std::size_t b = 0; b < out.size(); ++b) {
    if (out[b]) {
      ens.replicates.push_back(std::move(*out[b]));
      ens.ids.push_back(b);
    } else {
      ++ens.dropped;
      ens.warnings.push_back("replicate " + std::to_string(b) + " dropped: " + failures[b]);
    }
  }
  if (ens.dropped * 5 > B)
    throw Error(ErrorKind::inference, std::to_string(ens.dropped) + " of " + std::to_string(B) +
                                          " bootstrap replicates failed (limit 20%)");
  if (ens.replicates.size() < 2) throw Error(ErrorKind::inference, "fewer than 2 bootstrap replicates survived");
  for (const auto& r : ens.replicates)
    if (r.taus != ens.replicates.front().taus || r.names != ens.replicates.front().names ||
        r.values.size() != ens.replicates.front().values.size())
      throw Error(ErrorKind::internal, "bootstrap replicates disagree in shape");
  return ens;
}

/// Elementwise sample variance across replicates, laid out like cube.values.
inline std::vector<double> replicate_variance(const BootstrapEnsemble& ens) {
  const auto& reps = ens.replicates;
  const std::size_t n = reps.front().values.size();
  std::vector<double> mean(n, 0.0), var(n, 0.0);
  for (const auto& r : reps)
    for (std::size_t i = 0; i < n; ++i) mean[i] += r.values[i];
  for (auto& m : mean) m /= static_cast<double>(reps.size());
  for (const auto& r : reps)
    for (std::size_t i = 0; i < n; ++i) var[i] += (r.values[i] - mean[i]) * (r.values[i] - mean[i]);
  for (auto& v : var) v /= static_cast<double>(reps.size() - 1);
  return var;
}

// ---------------------------------------------------------------------------
// Hausman statistic

struct HausmanResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  bool degenerate = false;
  double scale = 1.0;
  double effective_dof = 0.0;
  std::string warning;
};

/// How H is referred to a distribution. chi_square uses chi2(dof). scaled
/// treats H as a weighted sum of chi2(1) terms and matches its first two
/// moments with a * chi2(nu), using the covariance of d to get the weights.
enum class HausmanReference { chi_square, scaled };

inline const char* to_string(HausmanReference r) { return r == HausmanReference::chi_square ? "chi-square" : "scaled"; }

/// beta_C holds R consecutive blocks of length R_E; each block is compared
/// with beta_E. Variances are elementwise and enter V on the diagonal, with
/// nonpositive entries dropped from the pseudo-inverse. cov_d, when given, is
/// the covariance of d used by the scaled reference.
inline HausmanResult hausman_statistic(const Eigen::VectorXd& beta_E, const Eigen::VectorXd& beta_C,
                                       const Eigen::VectorXd& var_E, const Eigen::VectorXd& var_C,
                                       const Eigen::MatrixXd* cov_d = nullptr) {
  const Index RE = beta_E.size();
  const Index n = beta_C.size();
  if (RE == 0 || var_E.size() != RE || var_C.size() != n || n % RE != 0)
    throw Error(ErrorKind::invalid_argument, "hausman_statistic: inconsistent dimensions");
  if (cov_d && (cov_d->rows() != n || cov_d->cols() != n))
    throw Error(ErrorKind::invalid_argument, "hausman_statistic: covariance of d has the wrong size");
  HausmanResult out;
  std::vector<Index> used;
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) {
    const double d = beta_E[i % RE] - beta_C[i];
    v[i] = var_C[i] - var_E[i % RE];
    if (v[i] > 0.0) {
      out.statistic += d * d / v[i];
      used.push_back(i);
    }
  }
  out.dof = static_cast<int>(used.size());
  if (out.dof == 0) {
    out.degenerate = true;
    out.statistic = 0.0;
    out.warning = "variance difference has no positive entries";
    return out;
  }
  out.effective_dof = out.dof;
  if (cov_d) {
    const auto m = static_cast<Index>(used.size());
    Eigen::MatrixXd M(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index b = 0; b < m; ++b)
        M(a, b) = (*cov_d)(used[a], used[b]) / std::sqrt(v[used[a]] * v[used[b]]);
    const double tr = M.trace(), tr2 = M.squaredNorm();
    if (tr > 0.0 && tr2 > 0.0) {
      out.scale = tr2 / tr;
      out.effective_dof = tr * tr / tr2;
    } else {
      out.warning = "covariance of d is degenerate; using chi-square reference";
    }
  }
  out.p_value = boost::math::cdf(
      boost::math::complement(boost::math::chi_squared(out.effective_dof), out.statistic / out.scale));
  return out;
}

// ---------------------------------------------------------------------------
// Decision maps

struct Estimate {
  CoefficientCube cube;
  BootstrapEnsemble ensemble;
};

struct MapCell {
  std::string covariate;
  std::string axis;  // "quantile": cell per grid point z; "momentum": cell per tau
  double coordinate = 0.0;
  int decision = 0;
  double p_value = 1.0;
  bool degenerate = false;
  double statistic = 0.0;
  int dof = 0;
};

struct HausmanMaps {
  std::vector<MapCell> cells;
  double level = 0.05;
  HausmanReference reference = HausmanReference::scaled;
  std::string caveat = kBootstrapCaveat;

  std::vector<MapCell> select(const std::string& covariate, const std::string& axis) const {
    std::vector<MapCell> out;
    for (const auto& c : cells)
      if (c.covariate == covariate && c.axis == axis) out.push_back(c);
    return out;
  }
};

namespace detail {
inline void require_estimate(const Estimate& e, const std::string& what) {
  if (e.ensemble.replicates.empty()) throw Error(ErrorKind::inference, what + " ensemble is empty");
  const auto& r = e.ensemble.replicates.front();
  if (r.taus != e.cube.taus || r.names != e.cube.names || r.num_grid() != e.cube.num_grid())
    throw Error(ErrorKind::inference, what + " ensemble does not match its point estimate");
}

inline MapCell decide(const std::string& cov, const std::string& axis, double coordinate, const HausmanResult& h,
                      double level) {
  MapCell c{cov, axis, coordinate, 0, h.p_value, h.degenerate, h.statistic, h.dof};
  c.decision = !h.degenerate && h.p_value < level ? 1 : 0;
  return c;
}

/// Positions of replicate ids shared by both ensembles.
inline std::vector<std::pair<std::size_t, std::size_t>> paired(const BootstrapEnsemble& a, const BootstrapEnsemble& b) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0, j = 0;
  while (i < a.ids.size() && j < b.ids.size()) {
    if (a.ids[i] == b.ids[j]) out.emplace_back(i++, j++);
    else if (a.ids[i] < b.ids[j]) ++i;
    else ++j;
  }
  return out;
}

/// One map cell: consistent coefficients at flat positions c_idx against the
/// efficient coefficient at flat position e_idx.
inline HausmanResult cell_test(const Estimate& C, const std::vector<double>& varC, const std::vector<std::size_t>& c_idx,
                               const Estimate& E, const std::vector<double>& varE, std::size_t e_idx,
                               HausmanReference ref) {
  const auto n = static_cast<Index>(c_idx.size());
  Eigen::VectorXd bC(n), vC(n);
  for (Index i = 0; i < n; ++i) {
    bC[i] = C.cube.values[c_idx[static_cast<std::size_t>(i)]];
    vC[i] = varC[c_idx[static_cast<std::size_t>(i)]];
  }
  const Eigen::VectorXd bE = Eigen::VectorXd::Constant(1, E.cube.values[e_idx]);
  const Eigen::VectorXd vE = Eigen::VectorXd::Constant(1, varE[e_idx]);
  if (ref == HausmanReference::chi_square) return hausman_statistic(bE, bC, vE, vC);

  const auto pairs = paired(C.ensemble, E.ensemble);
  if (pairs.size() < 3) throw Error(ErrorKind::inference, "scaled Hausman reference needs paired bootstrap replicates");
  Eigen::MatrixXd D(static_cast<Index>(pairs.size()), n);
  for (std::size_t b = 0; b < pairs.size(); ++b) {
    const auto& rc = C.ensemble.replicates[pairs[b].first].values;
    const double re = E.ensemble.replicates[pairs[b].second].values[e_idx];
    for (Index i = 0; i < n; ++i) D(static_cast<Index>(b), i) = re - rc[c_idx[static_cast<std::size_t>(i)]];
  }
  const Eigen::MatrixXd centered = D.rowwise() - D.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(D.rows() - 1);
  return hausman_statistic(bE, bC, vE, vC, &cov);
}
}  // namespace detail

/// Slope covariates only. Quantile map: at each grid point, CPQR across taus
/// against the CQR slope there. Momentum map: at each tau, CPQR across grid
/// points against the QAR(2) coefficient of the same name. The scaled
/// reference pairs replicates by id, so the three ensembles should share a
/// seed and block length.
inline HausmanMaps hausman_maps(const Estimate& cpqr, const Estimate& cqr, const Estimate& qar2, double level,
                                HausmanReference ref = HausmanReference::scaled) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::invalid_argument, "level must lie in (0, 1)");
  detail::require_estimate(cpqr, "CPQR");
  detail::require_estimate(cqr, "CQR");
  detail::require_estimate(qar2, "QAR(2)");
  const auto& C = cpqr.cube;
  if (cqr.cube.taus != C.taus || cqr.cube.names != C.names || cqr.cube.grid.points() != C.grid.points())
    throw Error(ErrorKind::inference, "CQR and CPQR estimates are not aligned");
  if (qar2.cube.taus != C.taus) throw Error(ErrorKind::inference, "QAR(2) and CPQR taus differ");

  const auto vC = replicate_variance(cpqr.ensemble);
  const auto vCqr = replicate_variance(cqr.ensemble);
  const auto vQar = replicate_variance(qar2.ensemble);
  const std::size_t Q = C.num_taus(), G = C.num_grid(), K = C.num_covariates();
  auto idx = [](const CoefficientCube& c, std::size_t q, std::size_t g, std::size_t k) {
    return (q * c.num_grid() + g) * c.num_covariates() + k;
  };

  HausmanMaps maps;
  maps.level = level;
  maps.reference = ref;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& name = C.names[k];
    if (name == "intercept") continue;
    for (std::size_t g = 0; g < G; ++g) {
      std::vector<std::size_t> ci;
      for (std::size_t q = 0; q < Q; ++q) ci.push_back(idx(C, q, g, k));
      // CQR slopes are shared, so the first tau row holds the efficient value.
      const auto h = detail::cell_test(cpqr, vC, ci, cqr, vCqr, idx(cqr.cube, 0, g, k), ref);
      maps.cells.push_back(detail::decide(name, "quantile", C.grid[g], h, level));
    }
    const std::size_t kq = qar2.cube.covariate_index(name);
    for (std::size_t q = 0; q < Q; ++q) {
      std::vector<std::size_t> ci;
      for (std::size_t g = 0; g < G; ++g) ci.push_back(idx(C, q, g, k));
      const auto h = detail::cell_test(cpqr, vC, ci, qar2, vQar, idx(qar2.cube, q, 0, kq), ref);
      maps.cells.push_back(detail::decide(name, "momentum", C.taus[q], h, level));
    }
  }
  return maps;
}

inline void write_maps(std::ostream& out, const std::vector<MapCell>& cells) {
  out << "covariate,axis,coordinate,decision,p_value,degenerate_flag,statistic,dof\n";
  for (const auto& c : cells)
    out << c.covariate << ',' << c.axis << ',' << format_double(c.coordinate) << ',' << c.decision << ','
        << format_double(c.p_value) << ',' << (c.degenerate ? 1 : 0) << ',' << format_double(c.statistic) << ','
        << c.dof << '\n';
}

inline std::vector<MapCell> read_maps(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("covariate,axis,coordinate,decision,p_value,degenerate_flag", 0) != 0)
    throw Error(ErrorKind::parse, "decision map: unexpected header");
  std::vector<MapCell> cells;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 8) throw Error(ErrorKind::parse, "decision map row " + std::to_string(row) + ": expected 8 fields");
    try {
      cells.push_back({f[0], f[1], std::stod(f[2]), std::stoi(f[3]), std::stod(f[4]), f[5] == "1", std::stod(f[6]),
                       std::stoi(f[7])});
    } catch (const std::exception&) {
      throw Error(ErrorKind::parse, "decision map row " + std::to_string(row) + ": bad number");
    }
  }
  return cells;
}

}  // namespace iar
