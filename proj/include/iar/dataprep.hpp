#pragma once

// Quarterly observation frames, the at-risk design for horizons 1 and 4, and
// the momentum conditioning grid.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "iar/error.hpp"

namespace iar {

using Eigen::Index;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// A calendar quarter; ordinal() counts quarters so consecutive quarters differ by one.
class Quarter {
 public:
  constexpr Quarter() = default;
  constexpr Quarter(int year, int quarter) : year_(year), quarter_(quarter) {
    if (quarter < 1 || quarter > 4) throw Error(ErrorKind::parse, "quarter must be 1..4");
  }

  static constexpr Quarter from_ordinal(std::int64_t ord) {
    const auto y = static_cast<int>(ord >= 0 ? ord / 4 : (ord - 3) / 4);
    return Quarter(y, static_cast<int>(ord - 4LL * y) + 1);
  }

  /// Accepts "1973Q1", "1973-Q1", "1973:Q1" and month-start ISO dates at
  /// quarter starts ("1973-01-01", "1973-04-01", ...).
  static std::optional<Quarter> parse(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '"')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '"' || text.back() == '\r')) text.remove_suffix(1);
    if (text.size() < 6) return std::nullopt;
    int year = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + 4, year);
    if (ec != std::errc{} || p != text.data() + 4) return std::nullopt;
    std::string_view rest = text.substr(4);
    if (rest.front() == '-' || rest.front() == ':' || rest.front() == ' ') rest.remove_prefix(1);
    if (rest.size() == 2 && (rest[0] == 'Q' || rest[0] == 'q') && rest[1] >= '1' && rest[1] <= '4') {
      return Quarter(year, rest[1] - '0');
    }
    // ISO month start: MM-DD with DD == 01 and MM in {01, 04, 07, 10}.
    if (rest.size() == 5 && rest[2] == '-') {
      int month = 0, day = 0;
      auto r1 = std::from_chars(rest.data(), rest.data() + 2, month);
      auto r2 = std::from_chars(rest.data() + 3, rest.data() + 5, day);
      if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != rest.data() + 2 || r2.ptr != rest.data() + 5)
        return std::nullopt;
      if (day != 1 || month < 1 || month > 12 || (month - 1) % 3 != 0) return std::nullopt;
      return Quarter(year, (month - 1) / 3 + 1);
    }
    return std::nullopt;
  }

  constexpr int year() const { return year_; }
  constexpr int quarter() const { return quarter_; }
  constexpr std::int64_t ordinal() const { return 4LL * year_ + (quarter_ - 1); }
  constexpr Quarter operator+(int n) const { return from_ordinal(ordinal() + n); }
  constexpr auto operator<=>(const Quarter&) const = default;

  std::string str() const { return std::to_string(year_) + "Q" + std::to_string(quarter_); }

 private:
  int year_ = 1970;
  int quarter_ = 1;
};

/// Canonical column roles of the inflation-at-risk frame.
namespace roles {
inline constexpr const char* inflation = "inflation";
inline constexpr const char* gdp = "gdp";
inline constexpr const char* import = "import";
inline constexpr const char* nfci = "nfci";
inline const std::vector<std::string>& all() {
  static const std::vector<std::string> r{inflation, gdp, import, nfci};
  return r;
}
}  // namespace roles

/// Maps each canonical role to the column name used in the input file.
using Schema = std::map<std::string, std::string>;

/// FRED series codes of the four model variables.
inline Schema fred_schema() {
  return {{roles::inflation, "CPIAUCSL_PC1"},
          {roles::gdp, "A191RL1Q225SBEA"},
          {roles::import, "B021RG3Q086SBEA_PC1"},
          {roles::nfci, "NFCI"}};
}

/// Identity schema: the file already uses the canonical role names.
inline Schema canonical_schema() {
  Schema s;
  for (const auto& r : roles::all()) s[r] = r;
  return s;
}

struct ObservationFrame {
  std::vector<Quarter> dates;
  std::map<std::string, std::vector<double>> columns;

  std::size_t size() const { return dates.size(); }

  const std::vector<double>& column(const std::string& name) const {
    auto it = columns.find(name);
    if (it == columns.end()) throw Error(ErrorKind::schema, "frame has no column " + name);
    return it->second;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(' ');
    const auto e = s.find_last_not_of(' ');
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return out;
}

inline std::optional<double> parse_cell(const std::string& cell) {
  if (cell.empty() || cell == "." || cell == "NA" || cell == "NaN" || cell == "nan") return kMissing;
  double v = 0.0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  auto [p, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (ec != std::errc{} || p != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Interior missing values are rejected; leading and trailing runs are allowed.
inline void check_edge_missing(const std::string& name, const std::vector<double>& v,
                               const std::vector<Quarter>& dates) {
  std::size_t first = 0, last = v.size();
  while (first < v.size() && is_missing(v[first])) ++first;
  while (last > first && is_missing(v[last - 1])) --last;
  for (std::size_t i = first; i < last; ++i) {
    if (is_missing(v[i])) {
      throw Error(ErrorKind::parse, "interior missing value in column " + name + " at " + dates[i].str());
    }
  }
}

}  // namespace detail

/// Reads a quarterly CSV: header row, date in the first column, numeric
/// columns after it. Columns named in `schema` are renamed to their roles;
/// other columns are ignored.
inline ObservationFrame read_frame(std::istream& in, const Schema& schema, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, source + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> position;
  for (const auto& [role, name] : schema) {
    auto it = std::find(header.begin() + 1, header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::schema, "missing column " + name);
    position[role] = static_cast<std::size_t>(it - header.begin());
  }

  ObservationFrame frame;
  for (const auto& [role, _] : schema) frame.columns[role];
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    const auto q = Quarter::parse(cells[0]);
    if (!q) throw Error(ErrorKind::parse, source + ": unparseable date '" + cells[0] + "' at row " + std::to_string(row));
    if (!frame.dates.empty()) {
      const auto gap = q->ordinal() - frame.dates.back().ordinal();
      if (gap != 1) {
        throw Error(ErrorKind::frequency, source + ": dates not consecutive quarters at row " + std::to_string(row) +
                                              " (" + frame.dates.back().str() + " -> " + q->str() + ")");
      }
    }
    frame.dates.push_back(*q);
    for (const auto& [role, pos] : position) {
      const std::string cell = pos < cells.size() ? cells[pos] : std::string{};
      const auto v = detail::parse_cell(cell);
      if (!v) {
        throw Error(ErrorKind::parse, source + ": unparseable value '" + cell + "' in column " + schema.at(role) +
                                          " at row " + std::to_string(row));
      }
      frame.columns[role].push_back(*v);
    }
  }
  for (const auto& [role, v] : frame.columns) detail::check_edge_missing(role, v, frame.dates);
  return frame;
}

inline ObservationFrame load_csv(const std::string& path, const Schema& schema = fred_schema()) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  return read_frame(in, schema, path);
}

inline std::string format_double(double v) {
  if (is_missing(v)) return "";
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

/// Inverse of format_double; an empty cell reads as missing.
inline double parse_double_exact(const std::string& s) {
  if (s.empty()) return kMissing;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw Error(ErrorKind::parse, "not a number: '" + s + "'");
  return v;
}

/// Writes the frame with canonical role names (or the schema's file names when given).
inline void write_frame(std::ostream& out, const ObservationFrame& frame, const Schema& schema = canonical_schema()) {
  out << "date";
  for (const auto& [role, name] : schema) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < frame.size(); ++i) {
    out << frame.dates[i].str();
    for (const auto& [role, _] : schema) out << ',' << format_double(frame.column(role)[i]);
    out << '\n';
  }
}

/// z_t = y_t - y_{t-1}; the first element is missing.
inline std::vector<double> compute_momentum(const std::vector<double>& y) {
  if (y.size() < 2) throw Error(ErrorKind::insufficient_data, "momentum needs at least two observations");
  std::vector<double> z(y.size(), kMissing);
  for (std::size_t t = 1; t < y.size(); ++t) z[t] = y[t] - y[t - 1];
  return z;
}

/// Which change is used as the conditioning variable at origin t.
enum class MomentumTiming {
  current,  // y_t - y_{t-1}
  lagged,   // y_{t-1} - y_{t-2}
};

struct DesignOptions {
  MomentumTiming timing = MomentumTiming::current;
  std::size_t min_rows = 10;
};

inline const std::vector<std::string>& design_covariate_names() {
  static const std::vector<std::string> names{"intercept", roles::inflation, roles::gdp, roles::import, roles::nfci};
  return names;
}

struct DesignSet {
  int horizon = 1;
  Eigen::VectorXd target;
  Eigen::MatrixXd covariates;  // [1, y_t, gdp_t, import_t, nfci_t]
  Eigen::VectorXd momentum;
  std::vector<Quarter> origin_dates;
  std::vector<std::string> names = design_covariate_names();
  std::size_t dropped = 0;

  Eigen::Index rows() const { return target.size(); }
  Eigen::Index num_covariates() const { return covariates.cols(); }

  /// Rows [0, n) as a new design.
  DesignSet head(Eigen::Index n) const {
    DesignSet d = *this;
    d.target = target.head(n);
    d.covariates = covariates.topRows(n);
    d.momentum = momentum.head(n);
    d.origin_dates.assign(origin_dates.begin(), origin_dates.begin() + n);
    return d;
  }

  DesignSet select(const std::vector<Eigen::Index>& rows_) const {
    DesignSet d = *this;
    const auto n = static_cast<Eigen::Index>(rows_.size());
    d.target.resize(n);
    d.covariates.resize(n, covariates.cols());
    d.momentum.resize(n);
    d.origin_dates.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = rows_[static_cast<std::size_t>(i)];
      d.target[i] = target[r];
      d.covariates.row(i) = covariates.row(r);
      d.momentum[i] = momentum[r];
      d.origin_dates.push_back(origin_dates[static_cast<std::size_t>(r)]);
    }
    return d;
  }
};

/// Target y_{t+1} (h = 1) or mean(y_{t+1..t+4}) (h = 4) against covariates
/// dated t; rows with any missing component are dropped.
inline DesignSet build_design(const ObservationFrame& frame, int h, const DesignOptions& options = {}) {
  if (h != 1 && h != 4) throw Error(ErrorKind::invalid_argument, "horizon must be 1 or 4");
  for (const auto& r : roles::all()) {
    if (!frame.columns.count(r)) throw Error(ErrorKind::schema, "frame has no column " + r);
  }
  const auto& y = frame.column(roles::inflation);
  const auto& gdp = frame.column(roles::gdp);
  const auto& imp = frame.column(roles::import);
  const auto& nfci = frame.column(roles::nfci);
  const std::size_t T = frame.size();

  struct Row {
    double target, y, gdp, imp, nfci, z;
    Quarter date;
  };
  std::vector<Row> rows;
  std::size_t dropped = 0;
  for (std::size_t t = 0; t < T; ++t) {
    double target = kMissing;
    if (t + static_cast<std::size_t>(h) < T) {
      double s = 0.0;
      for (int j = 1; j <= h; ++j) s += y[t + static_cast<std::size_t>(j)];
      target = s / h;
    }
    double z = kMissing;
    if (options.timing == MomentumTiming::current && t >= 1) z = y[t] - y[t - 1];
    if (options.timing == MomentumTiming::lagged && t >= 2) z = y[t - 1] - y[t - 2];
    const Row r{target, y[t], gdp[t], imp[t], nfci[t], z, frame.dates[t]};
    if (is_missing(r.target) || is_missing(r.y) || is_missing(r.gdp) || is_missing(r.imp) || is_missing(r.nfci) ||
        is_missing(r.z)) {
      ++dropped;
      continue;
    }
    rows.push_back(r);
  }
  if (rows.size() < options.min_rows) {
    throw Error(ErrorKind::insufficient_data, "only " + std::to_string(rows.size()) + " complete rows for horizon " +
                                                  std::to_string(h) + " (need " + std::to_string(options.min_rows) +
                                                  ")");
  }

  DesignSet d;
  d.horizon = h;
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.target.resize(n);
  d.covariates.resize(n, 5);
  d.momentum.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.target[i] = r.target;
    d.covariates.row(i) << 1.0, r.y, r.gdp, r.imp, r.nfci;
    d.momentum[i] = r.z;
    d.origin_dates.push_back(r.date);
  }
  d.dropped = dropped;
  return d;
}

/// Ordered conditioning values; each point owns the half-open interval
/// between the midpoints to its neighbours.
class ConditioningGrid {
 public:
  ConditioningGrid() : ConditioningGrid(std::vector<double>{0.0}) {}

  explicit ConditioningGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error(ErrorKind::invalid_argument, "grid needs at least one point");
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (!(points_[i] > points_[i - 1])) throw Error(ErrorKind::invalid_argument, "grid must be strictly increasing");
    }
  }

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }

  /// [lo, hi) for point i; -inf / +inf at the ends.
  std::pair<double, double> bounds(std::size_t i) const {
    const double inf = std::numeric_limits<double>::infinity();
    const double lo = i == 0 ? -inf : 0.5 * (points_[i - 1] + points_[i]);
    const double hi = i + 1 == points_.size() ? inf : 0.5 * (points_[i] + points_[i + 1]);
    return {lo, hi};
  }

  /// Nearest grid point; exact ties go to the lower point and values outside
  /// the grid map to the boundary point.
  std::size_t nearest(double z) const {
    if (z <= points_.front()) return 0;
    if (z >= points_.back()) return points_.size() - 1;
    const auto it = std::upper_bound(points_.begin(), points_.end(), z);
    const auto hi = static_cast<std::size_t>(it - points_.begin());
    const std::size_t lo = hi - 1;
    return (z - points_[lo]) <= (points_[hi] - z) ? lo : hi;
  }

 private:
  std::vector<double> points_;
};

/// -2.0, -1.8, ..., 2.0
inline ConditioningGrid default_grid() {
  std::vector<double> p;
  for (int i = -10; i <= 10; ++i) p.push_back(static_cast<double>(2 * i) / 10.0);
  return ConditioningGrid(std::move(p));
}

}  // namespace iar
