#pragma once

#include "imkit/association.hpp"
#include "imkit/engine.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace imkit::cli {

using Json = nlohmann::ordered_json;

/// Bad flags, unreadable inputs or inconsistent options (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fmt17(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

/// Shortest round-trip form, for console messages.
inline std::string fmt_short(double v) { return Json(v).dump(); }

inline double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + text + "' is not a number");
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size()) throw ConfigError(what + ": '" + text + "' is not a number");
  return v;
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_number(part, what));
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

/// `lo:hi:count`.
inline std::vector<double> parse_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw ConfigError("grid '" + text + "' must have the form lo:hi:count");
  const double lo = parse_number(parts[0], "grid lower end");
  const double hi = parse_number(parts[1], "grid upper end");
  const double count = parse_number(parts[2], "grid count");
  if (!(count >= 2) || count != std::floor(count) || count > 1e7) {
    throw ConfigError("grid count must be an integer >= 2");
  }
  if (!(lo < hi)) throw ConfigError("grid needs lo < hi");
  return linspace(lo, hi, static_cast<std::size_t>(count));
}

/// Every numeric field of a CSV file in reading order; a non-numeric first line is a header.
inline std::vector<double> read_csv_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read data file " + path);
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    bool numeric = true;
    for (const auto& field : split(line, ',')) {
      try {
        row.push_back(parse_number(field, "value"));
      } catch (const ConfigError&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (line_no == 1) continue;
      throw ConfigError(path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    out.insert(out.end(), row.begin(), row.end());
  }
  if (out.empty()) throw ConfigError("data file " + path + " has no values");
  return out;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed for " + path);
}

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline Json to_json(const Vec& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Json to_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

/// Header theta_1,...,theta_p,pl.
inline std::string curve_csv(const PlausibilityCurve& c) {
  std::ostringstream s;
  const std::size_t p = c.axes.size();
  for (std::size_t k = 0; k < p; ++k) s << "theta_" << k + 1 << ",";
  s << "pl\n";
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    for (std::size_t k = 0; k < p; ++k) s << fmt17(c.points[i][static_cast<Eigen::Index>(k)]) << ",";
    s << fmt17(c.pl[i]) << "\n";
  }
  return s.str();
}

/// One numeric column with a header line.
inline std::string column_csv(const std::string& header, const Vec& v) {
  std::ostringstream s;
  s << header << "\n";
  for (double x : v) s << fmt17(x) << "\n";
  return s.str();
}

/// Rows with named column prefixes, e.g. ("tau", p) then ("u", n).
inline std::string table_csv(const std::vector<std::pair<std::string, std::size_t>>& blocks, const std::vector<Vec>& rows) {
  std::ostringstream s;
  bool first = true;
  for (const auto& [name, count] : blocks) {
    for (std::size_t k = 0; k < count; ++k) {
      s << (first ? "" : ",") << name << "_" << k + 1;
      first = false;
    }
  }
  s << "\n";
  for (const Vec& r : rows) {
    for (Eigen::Index k = 0; k < r.size(); ++k) s << (k ? "," : "") << fmt17(r[k]);
    s << "\n";
  }
  return s.str();
}

}  // namespace imkit::cli
