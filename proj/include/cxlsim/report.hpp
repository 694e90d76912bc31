#pragma once

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxlsim/config.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim {

inline constexpr std::string_view kSimulatorName = "cxlsim";
inline constexpr std::string_view kSimulatorVersion = "0.1.0";

using Json = nlohmann::ordered_json;

/// Tabular experiment result plus named scalar metrics. Cells are JSON
/// values (number, string or null for "not reported").
struct Report {
  std::string kind;
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;
  Json summary = Json::object();
  std::vector<std::string> warnings;
  std::map<std::string, std::map<std::string, std::string>> config;
  std::string timestamp;

  void add_row(std::vector<Json> r) {
    if (r.size() != columns.size()) throw std::logic_error("row width does not match columns");
    rows.push_back(std::move(r));
  }

  std::size_t column(const std::string& c) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == c) return i;
    throw UsageError("report has no column '" + c + "'");
  }

  const Json& cell(std::size_t row, const std::string& col) const { return rows.at(row).at(column(col)); }
  double number(std::size_t row, const std::string& col) const { return cell(row, col).get<double>(); }
  double metric(const std::string& key) const {
    if (!summary.contains(key)) throw UsageError("report has no metric '" + key + "'");
    return summary.at(key).get<double>();
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline Json body_json(const Report& r) {
  Json j;
  j["simulator"] = {{"name", kSimulatorName}, {"version", kSimulatorVersion}};
  j["kind"] = r.kind;
  j["name"] = r.name;
  j["seed"] = r.seed;
  j["config"] = r.config;
  j["columns"] = r.columns;
  j["rows"] = r.rows;
  j["summary"] = r.summary;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace detail

/// Hash of everything except the wall-clock timestamp; equal configs and
/// seeds must give equal hashes.
inline std::uint64_t determinism_hash(const Report& r) { return fnv1a(detail::body_json(r).dump()); }

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline Json to_json(const Report& r) {
  Json j = detail::body_json(r);
  j["determinism_hash"] = hash_hex(determinism_hash(r));
  j["timestamp"] = r.timestamp;
  return j;
}

inline Report report_from_json(const Json& j) {
  Report r;
  try {
    r.kind = j.at("kind").get<std::string>();
    r.name = j.value("name", "");
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("config")) r.config = j.at("config").get<std::map<std::string, std::map<std::string, std::string>>>();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) r.add_row(std::vector<Json>(row.begin(), row.end()));
    r.summary = j.at("summary");
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.timestamp = j.value("timestamp", "");
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed report: ") + e.what());
  }
  return r;
}

inline Report parse_json_report(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("report is not valid JSON: ") + e.what());
  }
  return report_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV: the table as <stem>.csv, metrics as <stem>_summary.csv (metric,value).
// Metadata rides in leading '#' lines so the table stays plain CSV.

namespace detail {

inline std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  return v.dump();
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline Json csv_value(const std::string& s) {
  if (s.empty()) return nullptr;
  const char c = s.front();
  if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
    try {
      Json v = Json::parse(s);
      if (v.is_number()) return v;
    } catch (const nlohmann::json::exception&) {
    }
  }
  return s;
}

}  // namespace detail

inline std::string to_csv(const Report& r) {
  std::ostringstream os;
  os << "# simulator: " << kSimulatorName << " " << kSimulatorVersion << "\n";
  os << "# kind: " << r.kind << "\n";
  if (!r.name.empty()) os << "# name: " << r.name << "\n";
  os << "# seed: " << r.seed << "\n";
  os << "# determinism_hash: " << hash_hex(determinism_hash(r)) << "\n";
  os << "# timestamp: " << r.timestamp << "\n";
  for (const auto& w : r.warnings) os << "# warning: " << w << "\n";
  for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
  os << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << detail::csv_cell(row[i]);
    os << "\n";
  }
  return os.str();
}

inline std::string summary_to_csv(const Report& r) {
  std::ostringstream os;
  os << "metric,value\n";
  for (const auto& [k, v] : r.summary.items()) os << k << "," << detail::csv_cell(v) << "\n";
  return os.str();
}

/// Inverse of to_csv/summary_to_csv. The config echo is not carried by CSV.
inline Report parse_csv_report(const std::string& table, const std::string& summary) {
  Report r;
  std::istringstream in(table);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(2, colon - 2);
      const std::string val = line.substr(colon + 2);
      if (key == "kind") r.kind = val;
      else if (key == "name") r.name = val;
      else if (key == "seed") r.seed = parse_uint_value(val);
      else if (key == "timestamp") r.timestamp = val;
      else if (key == "warning") r.warnings.push_back(val);
      continue;
    }
    auto cells = detail::csv_split(line);
    if (!header) {
      r.columns = cells;
      header = true;
      continue;
    }
    if (cells.size() != r.columns.size()) throw UsageError("csv row width mismatch: " + line);
    std::vector<Json> row;
    for (const auto& c : cells) row.push_back(detail::csv_value(c));
    r.rows.push_back(std::move(row));
  }
  std::istringstream sin(summary);
  std::getline(sin, line);  // header
  while (std::getline(sin, line)) {
    if (line.empty()) continue;
    auto cells = detail::csv_split(line);
    if (cells.size() != 2) throw UsageError("summary csv row must have 2 cells: " + line);
    r.summary[cells[0]] = detail::csv_value(cells[1]);
  }
  return r;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw UsageError("cannot write " + p.string());
  out << text;
}

/// Writes <dir>/<stem>.{json,csv} and <stem>_summary.csv per `format`.
/// Returns the paths written.
inline std::vector<std::filesystem::path> write_report(const Report& r, const std::filesystem::path& dir,
                                                       const std::string& format) {
  const std::string stem = r.name.empty() ? r.kind : r.name;
  std::vector<std::filesystem::path> out;
  if (format == "json" || format == "both") {
    out.push_back(dir / (stem + ".json"));
    write_file(out.back(), to_json(r).dump(2) + "\n");
  }
  if (format == "csv" || format == "both") {
    out.push_back(dir / (stem + ".csv"));
    write_file(out.back(), to_csv(r));
    out.push_back(dir / (stem + "_summary.csv"));
    write_file(out.back(), summary_to_csv(r));
  }
  return out;
}

/// Loads a .json report, or a .csv table with its _summary.csv sibling.
inline Report load_report(const std::filesystem::path& p) {
  if (p.extension() == ".json") return parse_json_report(read_file(p));
  if (p.extension() == ".csv") {
    std::filesystem::path s = p;
    s.replace_filename(p.stem().string() + "_summary.csv");
    const std::string summary = std::filesystem::exists(s) ? read_file(s) : std::string("metric,value\n");
    return parse_csv_report(read_file(p), summary);
  }
  throw UsageError("unknown report format: " + p.string());
}

// ---------------------------------------------------------------------------
// Comparison

/// "5%" or "0.05" as a default, optionally followed by metric overrides:
/// "5%,p9999=10%,max=0.2". An override matches a metric whose name equals it
/// or ends with ".<name>".
struct ToleranceSpec {
  double default_rel = 0.05;
  std::map<std::string, double> overrides;

  static double parse_fraction(std::string s) {
    s = detail::trim(s);
    bool pct = !s.empty() && s.back() == '%';
    if (pct) s.pop_back();
    double v = 0;
    try {
      v = parse_double_value(detail::trim(s));
    } catch (const ConfigError& e) {
      throw UsageError(std::string("bad tolerance: ") + e.what());
    }
    if (pct) v /= 100.0;
    if (v < 0) throw UsageError("tolerance must be >= 0");
    return v;
  }

  static ToleranceSpec parse(const std::string& spec) {
    ToleranceSpec t;
    std::vector<std::string> parts;
    try {
      parts = split_list(spec);
    } catch (const ConfigError& e) {
      throw UsageError(std::string("bad tolerance spec: ") + e.what());
    }
    for (const auto& p : parts) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) t.default_rel = parse_fraction(p);
      else t.overrides[detail::trim(p.substr(0, eq))] = parse_fraction(p.substr(eq + 1));
    }
    return t;
  }

  double for_metric(const std::string& m) const {
    for (const auto& [k, v] : overrides)
      if (m == k || (m.size() > k.size() && m.compare(m.size() - k.size() - 1, std::string::npos, "." + k) == 0))
        return v;
    return default_rel;
  }
};

struct CompareRow {
  std::string metric;
  std::optional<double> a, b;
  double rel_err = 0;
  double tolerance = 0;
  bool pass = true;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const CompareRow& r) { return r.pass; });
  }
};

inline double relative_error(double a, double b) {
  if (a == b) return 0.0;
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  return std::fabs(b - a) / std::fabs(a);
}

/// Compares every numeric summary metric and every numeric table cell
/// (keyed "<first column value>.<column>") of `a` against `b`.
inline CompareResult compare_reports(const Report& a, const Report& b, const ToleranceSpec& tol) {
  if (a.kind != b.kind) throw UsageError("cannot compare a " + a.kind + " report with a " + b.kind + " report");
  auto flatten = [](const Report& r) {
    std::map<std::string, std::optional<double>> m;
    for (const auto& [k, v] : r.summary.items())
      if (v.is_number()) m[k] = v.get<double>();
      else if (v.is_null()) m[k] = std::nullopt;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const std::string key = r.rows[i].empty() ? std::to_string(i) : detail::csv_cell(r.rows[i][0]);
      for (std::size_t c = 1; c < r.columns.size(); ++c) {
        const Json& v = r.rows[i][c];
        if (v.is_number()) m[key + "." + r.columns[c]] = v.get<double>();
        else if (v.is_null()) m[key + "." + r.columns[c]] = std::nullopt;
      }
    }
    return m;
  };
  const auto ma = flatten(a);
  const auto mb = flatten(b);
  CompareResult out;
  for (const auto& [k, va] : ma) {
    CompareRow row{k, va, std::nullopt, 0, tol.for_metric(k), false};
    auto it = mb.find(k);
    if (it != mb.end()) row.b = it->second;
    if (it == mb.end()) {
      row.pass = false;
    } else if (!va || !row.b) {
      row.pass = !va && !row.b;
    } else {
      row.rel_err = relative_error(*va, *row.b);
      row.pass = row.rel_err <= row.tolerance;
    }
    out.rows.push_back(std::move(row));
  }
  for (const auto& [k, vb] : mb)
    if (!ma.contains(k)) out.rows.push_back({k, std::nullopt, vb, 0, tol.for_metric(k), false});
  return out;
}

inline std::string format_comparison(const CompareResult& c) {
  std::ostringstream os;
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s.precision(6);
    s << *v;
    return s.str();
  };
  os << "metric,a,b,rel_err,tolerance,status\n";
  for (const auto& r : c.rows)
    os << r.metric << "," << num(r.a) << "," << num(r.b) << "," << num(r.rel_err) << "," << num(r.tolerance) << ","
       << (r.pass ? "ok" : "FAIL") << "\n";
  return os.str();
}

}  // namespace cxlsim
