#pragma once

// FRED download client with a per-series file cache. Needs httplib built with
// CPPHTTPLIB_OPENSSL_SUPPORT.

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

// Eigen before httplib: resolv.h defines a _res macro that breaks Eigen's
// product kernels.
#include "iar/cube_io.hpp"
#include "iar/dataprep.hpp"
#include "iar/error.hpp"

#include <httplib.h>

namespace iar {

inline std::vector<std::string> table_codes() {
  return {"CPIAUCSL_PC1", "A191RL1Q225SBEA", "B021RG3Q086SBEA_PC1", "NFCI"};
}

struct FetchOptions {
  std::filesystem::path cache_dir = ".iar_cache";
  bool offline = false;
  bool refresh = false;
  std::string host = "https://fred.stlouisfed.org";
  int timeout_seconds = 30;
};

/// Query path for a code; a _PC1 suffix asks FRED for the year-on-year
/// percent change of the base series. Everything is averaged to quarters.
inline std::string fred_query(const std::string& code) {
  if (code.empty() || code.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") != std::string::npos)
    throw Error(ErrorKind::invalid_argument, "not a FRED series code: '" + code + "'");
  std::string id = code, transform;
  const std::string suffix = "_PC1";
  if (code.size() > suffix.size() && code.compare(code.size() - suffix.size(), suffix.size(), suffix) == 0) {
    id = code.substr(0, code.size() - suffix.size());
    transform = "&transformation=pc1";
  }
  return "/graph/fredgraph.csv?id=" + id + "&fq=Quarterly&fam=avg" + transform;
}

inline std::filesystem::path cache_path(const FetchOptions& o, const std::string& code) {
  return o.cache_dir / (code + ".csv");
}

/// Path of the cached CSV for code, downloading it first unless cached (or
/// offline).
inline std::filesystem::path fetch_fred_series(const std::string& code, const FetchOptions& o) {
  const auto query = fred_query(code);
  const auto path = cache_path(o, code);
  if (std::filesystem::exists(path) && !o.refresh) return path;
  if (o.offline) throw Error(ErrorKind::fetch, code + ": not in cache " + o.cache_dir.string() + " and offline mode is on");
  httplib::Client cli(o.host);
  cli.set_connection_timeout(o.timeout_seconds);
  cli.set_read_timeout(o.timeout_seconds);
  cli.set_follow_location(true);
  const auto res = cli.Get(query);
  if (!res) throw Error(ErrorKind::fetch, code + ": request failed (" + httplib::to_string(res.error()) + ")");
  if (res->status != 200) throw Error(ErrorKind::fetch, code + ": HTTP status " + std::to_string(res->status));
  if (res->body.find(',') == std::string::npos || res->body.rfind("<", 0) == 0)
    throw Error(ErrorKind::fetch, code + ": response is not a CSV");
  std::filesystem::create_directories(o.cache_dir);
  write_text(path, res->body);
  return path;
}

inline std::vector<std::filesystem::path> fetch_fred(const std::vector<std::string>& codes, const FetchOptions& o) {
  std::vector<std::filesystem::path> out;
  for (const auto& c : codes) out.push_back(fetch_fred_series(c, o));
  return out;
}

/// Joins cached series on their dates into one CSV (date column first, one
/// column per code), keeping quarters in [start, end] when given. Dates that
/// a series lacks are left empty.
inline std::string merge_fred(const std::vector<std::string>& codes, const FetchOptions& o,
                              std::optional<Quarter> start = std::nullopt, std::optional<Quarter> end = std::nullopt) {
  std::map<Quarter, std::map<std::string, std::string>> rows;
  for (const auto& code : codes) {
    const auto path = cache_path(o, code);
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::parse, path.string() + ": empty file");
    int row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() != 2) throw Error(ErrorKind::parse, path.string() + " row " + std::to_string(row) + ": expected 2 fields");
      const auto q = Quarter::parse(f[0]);
      if (!q) throw Error(ErrorKind::parse, path.string() + " row " + std::to_string(row) + ": bad date '" + f[0] + "'");
      if ((start && *q < *start) || (end && *end < *q)) continue;
      rows[*q][code] = f[1] == "." ? "" : f[1];
    }
  }
  std::ostringstream out;
  out << "date";
  for (const auto& c : codes) out << ',' << c;
  out << '\n';
  for (const auto& [q, cells] : rows) {
    out << q.str();
    for (const auto& c : codes) {
      auto it = cells.find(c);
      out << ',' << (it == cells.end() ? "" : it->second);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace iar
