#pragma once

// Coefficient cubes on disk: a tidy CSV (tau, z, covariate, value) and a JSON
// sidecar with the metadata needed to read it back.

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "iar/dataprep.hpp"
#include "iar/error.hpp"
#include "iar/estimators.hpp"

namespace iar {

using Json = nlohmann::ordered_json;

inline void write_cube_csv(std::ostream& out, const CoefficientCube& c) {
  out << "tau,z,covariate,value\n";
  for (std::size_t q = 0; q < c.num_taus(); ++q)
    for (std::size_t g = 0; g < c.num_grid(); ++g)
      for (std::size_t k = 0; k < c.num_covariates(); ++k)
        out << format_double(c.taus[q]) << ',' << format_double(c.grid[g]) << ',' << c.names[k] << ','
            << format_double(c.at(q, g, k)) << '\n';
}

inline Json cube_sidecar(const CoefficientCube& c) {
  Json j;
  j["estimator"] = c.estimator;
  j["shape"] = {c.num_taus(), c.num_grid(), c.num_covariates()};
  j["taus"] = c.taus;
  j["grid"] = c.grid.points();
  j["covariates"] = c.names;
  j["bandwidth"] = c.bandwidth ? Json(c.bandwidth->fraction()) : Json(nullptr);
  j["noncrossing"] = c.noncrossing;
  j["warnings"] = c.warnings;
  return j;
}

/// Reads a cube CSV using the sidecar for shape and labels.
inline CoefficientCube read_cube(std::istream& csv, const Json& meta) {
  CoefficientCube c;
  try {
    c = CoefficientCube::shaped(meta.at("estimator").get<std::string>(), meta.at("taus").get<std::vector<double>>(),
                                ConditioningGrid(meta.at("grid").get<std::vector<double>>()),
                                meta.at("covariates").get<std::vector<std::string>>());
    if (!meta.at("bandwidth").is_null()) c.bandwidth = BandwidthSpec::from_fraction(meta.at("bandwidth").get<double>());
    c.noncrossing = meta.at("noncrossing").get<bool>();
    if (meta.contains("warnings")) c.warnings = meta.at("warnings").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, std::string("cube sidecar: ") + e.what());
  }
  std::string line;
  if (!std::getline(csv, line) || line != "tau,z,covariate,value") throw Error(ErrorKind::parse, "cube CSV: unexpected header");
  std::size_t n = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    if (n >= c.values.size()) throw Error(ErrorKind::parse, "cube CSV has more rows than the sidecar shape");
    const auto f = detail::split_csv_line(line);
    const std::size_t k = n % c.num_covariates();
    const std::size_t g = (n / c.num_covariates()) % c.num_grid();
    const std::size_t q = n / (c.num_covariates() * c.num_grid());
    if (f.size() != 4 || f[2] != c.names[k] || parse_double_exact(f[0]) != c.taus[q] || parse_double_exact(f[1]) != c.grid[g])
      throw Error(ErrorKind::parse, "cube CSV row " + std::to_string(n + 2) + " does not match the sidecar layout");
    c.at(q, g, k) = parse_double_exact(f[3]);
    ++n;
  }
  if (n != c.values.size()) throw Error(ErrorKind::parse, "cube CSV has fewer rows than the sidecar shape");
  return c;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

/// Header plus string cells of a CSV file, for reading back the tables this
/// library writes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(ErrorKind::schema, "table has no column " + name);
  }
};

inline CsvTable read_csv_table(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "missing file: " + path.string());
  std::istringstream in(read_text(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, path.string() + ": empty file");
  t.header = detail::split_csv_line(line);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size())
      throw Error(ErrorKind::parse, path.string() + " row " + std::to_string(row) + ": expected " +
                                        std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

/// Writes <dir>/<stem>.csv and <dir>/<stem>.json.
inline void save_cube(const std::filesystem::path& dir, const std::string& stem, const CoefficientCube& c,
                      const Json& extra = Json::object()) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_cube_csv(csv, c);
  write_text(dir / (stem + ".csv"), csv.str());
  Json meta = cube_sidecar(c);
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  write_text(dir / (stem + ".json"), dump_json(meta));
}

inline CoefficientCube load_cube(const std::filesystem::path& dir, const std::string& stem) {
  const auto meta = read_json(dir / (stem + ".json"));
  std::istringstream csv(read_text(dir / (stem + ".csv")));
  return read_cube(csv, meta);
}

}  // namespace iar
