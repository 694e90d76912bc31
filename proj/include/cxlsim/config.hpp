#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cxlsim/cmmh.hpp"
#include "cxlsim/engine.hpp"
#include "cxlsim/flat_dram.hpp"
#include "cxlsim/random.hpp"
#include "cxlsim/topology.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim {

// ---------------------------------------------------------------------------
// Line-oriented key/value file with [section] headers.
//
//   # comment
//   [experiment]
//   kind = tail_sweep
//   seed = 7
//
// Every entry keeps its source line so schema errors can point at it.

struct IniEntry {
  std::string value;
  std::size_t line = 0;
};

struct IniSection {
  std::string name;
  std::size_t line = 0;
  std::map<std::string, IniEntry> entries;
};

struct IniFile {
  std::string source;  // file name used in messages
  std::vector<IniSection> sections;

  const IniSection* find(std::string_view name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace detail

inline std::string at_line(const std::string& source, std::size_t line, const std::string& msg) {
  return source + ":" + std::to_string(line) + ": " + msg;
}

inline IniFile parse_ini(std::string_view text, std::string source = "<config>") {
  IniFile f;
  f.source = std::move(source);
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t n = 0;
  IniSection* cur = nullptr;
  while (std::getline(in, raw)) {
    ++n;
    if (auto h = raw.find_first_of("#;"); h != std::string::npos) raw.resize(h);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(at_line(f.source, n, "unterminated section header"));
      const std::string name = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError(at_line(f.source, n, "empty section name"));
      if (f.find(name)) throw ConfigError(at_line(f.source, n, "duplicate section [" + name + "]"));
      f.sections.push_back(IniSection{name, n, {}});
      cur = &f.sections.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(at_line(f.source, n, "expected key = value"));
    if (!cur) throw ConfigError(at_line(f.source, n, "key outside of any [section]"));
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string val = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(at_line(f.source, n, "empty key"));
    if (cur->entries.contains(key)) throw ConfigError(at_line(f.source, n, "duplicate key '" + key + "'"));
    cur->entries.emplace(key, IniEntry{val, n});
  }
  return f;
}

// ---------------------------------------------------------------------------
// Value parsers. Sizes: B, KiB/MiB/GiB/TiB (binary), KB/MB/GB/TB (decimal).
// Times: ns (default), us, ms, s; fractional values allowed.

inline double parse_double_value(std::string_view s) {
  const std::string str(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + str + "'");
  }
  if (used != str.size() || !std::isfinite(v)) throw ConfigError("not a number: '" + str + "'");
  return v;
}

inline std::uint64_t parse_uint_value(std::string_view s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("not an unsigned integer: '" + std::string(s) + "'");
  return v;
}

inline std::pair<double, std::string> split_unit(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == 'e' ||
                          s[i] == 'E' || s[i] == '+' || s[i] == '-'))
    ++i;
  if (i == 0) throw ConfigError("missing number in '" + std::string(s) + "'");
  return {parse_double_value(s.substr(0, i)), detail::trim(s.substr(i))};
}

inline std::uint64_t parse_size(std::string_view s) {
  const auto [num, unit] = split_unit(s);
  static const std::map<std::string, std::uint64_t> mult{
      {"", 1},         {"b", 1},          {"kib", KiB},      {"mib", MiB},      {"gib", GiB},
      {"tib", TiB},    {"kb", 1000},      {"mb", 1000'000},  {"gb", 1000'000'000}, {"tb", 1000'000'000'000},
      {"k", KiB},      {"m", MiB},        {"g", GiB},        {"t", TiB}};
  auto it = mult.find(detail::lower(unit));
  if (it == mult.end()) throw ConfigError("unknown size unit '" + unit + "'");
  const double bytes = num * static_cast<double>(it->second);
  if (bytes < 0 || bytes != std::floor(bytes)) throw ConfigError("size must be a whole number of bytes: '" + std::string(s) + "'");
  return static_cast<std::uint64_t>(bytes);
}

inline double parse_time_ns(std::string_view s) {
  const auto [num, unit] = split_unit(s);
  static const std::map<std::string, double> mult{{"", 1}, {"ns", 1}, {"us", 1e3}, {"ms", 1e6}, {"s", 1e9}};
  auto it = mult.find(detail::lower(unit));
  if (it == mult.end()) throw ConfigError("unknown time unit '" + unit + "'");
  if (num < 0) throw ConfigError("time must be >= 0");
  return num * it->second;
}

inline bool parse_bool(std::string_view s) {
  const std::string l = detail::lower(std::string(s));
  if (l == "true" || l == "yes" || l == "1" || l == "on") return true;
  if (l == "false" || l == "no" || l == "0" || l == "off") return false;
  throw ConfigError("not a boolean: '" + std::string(s) + "'");
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(detail::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!detail::trim(cur).empty() || !out.empty()) out.push_back(detail::trim(cur));
  for (const auto& e : out)
    if (e.empty()) throw ConfigError("empty list element in '" + std::string(s) + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Schema

enum class ValueType : std::uint8_t { UInt, Size, Time, Double, Bool, String, SizeList, UIntList, StringList };

struct KeySpec {
  std::string_view key;
  ValueType type;
  std::string_view doc;
};

struct SectionSpec {
  std::string_view name;
  std::vector<KeySpec> keys;
};

inline const std::vector<SectionSpec>& config_schema() {
  using V = ValueType;
  static const std::vector<SectionSpec> s{
      {"experiment",
       {{"kind", V::String, "calibration | bandwidth | tail_sweep | hit_rate | crash | wal | interleave | kv"},
        {"seed", V::UInt, "base RNG seed"},
        {"name", V::String, "free-form label echoed in reports"}}},
      {"output",
       {{"dir", V::String, "report directory"},
        {"format", V::String, "csv | json | both"},
        {"normalize_to", V::String, "baseline node for normalized columns"}}},
      {"host",
       {{"mlp_window", V::UInt, "outstanding requests per thread"},
        {"issue_interval", V::Time, "minimum spacing of issues from one thread"},
        {"fence_drain", V::Bool, "fences wait for posted stores"}}},
      {"device",
       {{"capacity", V::Size, "host-visible device capacity"},
        {"cache_capacity", V::Size, "device DRAM cache size"},
        {"ways", V::UInt, "cache associativity"},
        {"t_link_rt", V::Time, "link round trip"},
        {"t_ctrl", V::Time, "controller processing"},
        {"t_tag", V::Time, "tag lookup"},
        {"t_data", V::Time, "DRAM cache data access"},
        {"t_write_txn", V::Time, "second transaction of a temporal store"},
        {"ii_read", V::Time, "read initiation interval"},
        {"ii_write", V::Time, "write initiation interval"}}},
      {"flash",
       {{"read_service", V::Time, "page read service time"},
        {"write_service", V::Time, "page write service time"},
        {"channels", V::UInt, "concurrent flash operations"},
        {"queue_capacity", V::UInt, "waiting-op limit before backpressure"},
        {"jitter", V::Double, "fractional +/- service-time jitter"}}},
      {"topology",
       {{"policy", V::String, "single:<node> | interleave:<node>=<w>,<node>=<w>..."},
        {"ddr5_local_read", V::Time, "DDR5-L serialized load"},
        {"ddr5_remote_read", V::Time, "DDR5-R serialized load"},
        {"ddr5_local_write_txn", V::Time, "DDR5-L store transaction"},
        {"ddr5_remote_write_txn", V::Time, "DDR5-R store transaction"},
        {"ddr5_local_posted_ack", V::Time, "DDR5-L posted store acknowledgement"},
        {"ddr5_remote_posted_ack", V::Time, "DDR5-R posted store acknowledgement"},
        {"ddr5_ii", V::Time, "DDR5 per-port initiation interval"},
        {"ddr5_ports", V::UInt, "DDR5 parallel ports"}}},
      {"workload",
       {{"node", V::String, "target node name"},
        {"batches", V::UInt, "16-wide batches per measurement"},
        {"batch_width", V::UInt, "accesses per batch"},
        {"region_size", V::Size, "random-access region"},
        {"chase_region", V::Size, "pointer-chase region"},
        {"chase_hops", V::UInt, "pointer-chase hops"},
        {"threads", V::UIntList, "thread counts"},
        {"kinds", V::StringList, "ld, nt-ld, st, nt-st"},
        {"lines_per_thread", V::UInt, "lines each bandwidth thread touches"},
        {"repetitions", V::UInt, "bandwidth repetitions per point"},
        {"region_sizes", V::SizeList, "tail-sweep region sizes"},
        {"batches_per_size", V::UInt, "tail-sweep batches per region size"},
        {"footprints", V::SizeList, "irregular-workload footprints"},
        {"lookups", V::UInt, "irregular lookups per footprint"},
        {"ratios", V::StringList, "interleave ratios fast:slow, e.g. 75:25"},
        {"fast_node", V::String, "interleave fast node"},
        {"slow_node", V::String, "interleave slow node"},
        {"ops", V::UInt, "operations"},
        {"accesses_per_op", V::UInt, "dependent accesses per interleave op"},
        {"op_compute", V::Time, "host compute per interleave op"},
        {"patterns", V::StringList, "kv patterns"},
        {"value_size", V::Size, "kv value size"},
        {"key_space", V::UInt, "kv key space (records)"}}},
      {"persistence",
       {{"plans", V::UInt, "random crash plans"},
        {"trace_ops", V::UInt, "ops per random trace"},
        {"num_regs", V::UInt, "abstract machine registers"},
        {"max_region_len", V::UInt, "region length cap"},
        {"gpf_budget", V::String, "unlimited | <size>"},
        {"scope", V::String, "host_and_device | device_only"},
        {"stores", V::UInt, "stores in the WAL comparison trace"},
        {"barrier_cost", V::Time, "extra cost per WAL ordering barrier"},
        {"trace_file", V::String, "optional abstract op trace to run"}}},
  };
  return s;
}

/// Node sections are [node.<name>] with these keys.
inline const std::vector<KeySpec>& node_section_keys() {
  using V = ValueType;
  static const std::vector<KeySpec> k{{"kind", V::String, "flat | cmmh"},
                                      {"capacity", V::Size, "node capacity"},
                                      {"read_latency", V::Time, "flat serialized load"},
                                      {"write_txn", V::Time, "flat store transaction"},
                                      {"posted_ack", V::Time, "flat posted store ack"},
                                      {"ii", V::Time, "flat per-port initiation interval"},
                                      {"ports", V::UInt, "flat parallel ports"}};
  return k;
}

// ---------------------------------------------------------------------------
// Typed, validated view

struct NodeSpec {
  std::string name;
  NodeKind kind = NodeKind::FlatDram;
  FlatDramConfig flat;
};

struct WorkloadConfig {
  std::string node = "CMM-H";
  std::uint64_t batches = 62'500;
  std::uint32_t batch_width = 16;
  std::uint64_t region_size = 1800 * MiB;
  std::uint64_t chase_region = 1800 * MiB;
  std::uint64_t chase_hops = 1'000'000;
  std::vector<std::uint64_t> threads{1, 2, 4, 8, 16, 32};
  std::vector<std::string> kinds{"ld", "st", "nt-st"};
  std::uint64_t lines_per_thread = 512;
  std::uint64_t repetitions = 10;
  std::vector<std::uint64_t> region_sizes;
  std::uint64_t batches_per_size = 200'000;
  std::vector<std::uint64_t> footprints;
  std::uint64_t lookups = 2'000'000;
  std::vector<std::string> ratios{"100:0", "75:25", "50:50", "25:75", "0:100"};
  std::string fast_node = "DDR5-L";
  std::string slow_node = "CMM-H";
  std::uint64_t ops = 20'000;
  std::uint64_t accesses_per_op = 4;
  SimTime op_compute = 200;
  std::vector<std::string> patterns{"fillseq", "fillrandom", "readseq", "readrandom", "deleteseq"};
  std::uint64_t value_size = 100;
  std::uint64_t key_space = 0;
};

struct PersistenceConfig {
  std::uint64_t plans = 1000;
  std::uint64_t trace_ops = 200;
  std::uint32_t num_regs = 16;
  std::uint64_t max_region_len = 64;
  std::optional<std::uint64_t> gpf_budget;  // nullopt = unlimited
  bool host_in_persistent_domain = true;
  std::uint64_t stores = 10'000;
  SimTime barrier_cost = 0;
  std::string trace_file;
};

struct OutputConfig {
  std::string dir = ".";
  std::string format = "both";
  std::string normalize_to;
};

struct ExperimentConfig {
  std::string kind;
  std::string name;
  std::uint64_t seed = 1;
  OutputConfig output;
  HostConfig host;
  CmmhConfig device;
  std::vector<NodeSpec> nodes;  // empty = DDR5-L, DDR5-R, CMM-H
  std::string policy = "single:CMM-H";
  WorkloadConfig workload;
  PersistenceConfig persistence;
  /// Every entry as written, for the report's config echo.
  std::map<std::string, std::map<std::string, std::string>> echo;
};

inline const std::vector<std::string_view>& experiment_kinds() {
  static const std::vector<std::string_view> k{"calibration", "bandwidth", "tail_sweep", "hit_rate",
                                               "crash",       "wal",       "interleave", "kv"};
  return k;
}

namespace detail {

inline SimTime as_ns(double v) { return round_ns(v); }

struct Reader {
  const IniFile& file;

  template <class F>
  auto with(const IniSection& s, const std::string& key, F&& parse) const {
    const IniEntry& e = s.entries.at(key);
    try {
      return parse(e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(at_line(file.source, e.line, "[" + s.name + "] " + key + ": " + err.what()));
    }
  }
};

inline void check_keys(const IniFile& f, const IniSection& s, const std::vector<KeySpec>& keys) {
  for (const auto& [k, e] : s.entries) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const KeySpec& ks) { return ks.key == k; });
    if (!known) throw ConfigError(at_line(f.source, e.line, "unknown key '" + k + "' in [" + s.name + "]"));
  }
}

}  // namespace detail

/// Schema-validate and build the typed config. Unknown sections and keys
/// are rejected with the offending line.
inline ExperimentConfig build_config(const IniFile& f) {
  ExperimentConfig c;
  detail::Reader rd{f};
  for (const auto& sec : f.sections) {
    for (const auto& [k, e] : sec.entries) c.echo[sec.name][k] = e.value;
    if (sec.name.rfind("node.", 0) == 0) {
      detail::check_keys(f, sec, node_section_keys());
      continue;
    }
    auto spec = std::find_if(config_schema().begin(), config_schema().end(),
                             [&](const SectionSpec& ss) { return ss.name == sec.name; });
    if (spec == config_schema().end()) throw ConfigError(at_line(f.source, sec.line, "unknown section [" + sec.name + "]"));
    detail::check_keys(f, sec, spec->keys);
  }

  auto get = [&](std::string_view section, const std::string& key) -> std::pair<const IniSection*, bool> {
    const IniSection* s = f.find(section);
    return {s, s && s->entries.contains(key)};
  };
  auto uint_of = [&](std::string_view section, const std::string& key, auto& out) {
    if (auto [s, has] = get(section, key); has)
      out = static_cast<std::remove_reference_t<decltype(out)>>(rd.with(*s, key, [](const std::string& v) { return parse_uint_value(v); }));
  };
  auto size_of = [&](std::string_view section, const std::string& key, std::uint64_t& out) {
    if (auto [s, has] = get(section, key); has) out = rd.with(*s, key, [](const std::string& v) { return parse_size(v); });
  };
  auto time_of = [&](std::string_view section, const std::string& key, double& out) {
    if (auto [s, has] = get(section, key); has) out = rd.with(*s, key, [](const std::string& v) { return parse_time_ns(v); });
  };
  auto itime_of = [&](std::string_view section, const std::string& key, SimTime& out) {
    if (auto [s, has] = get(section, key); has)
      out = rd.with(*s, key, [](const std::string& v) { return detail::as_ns(parse_time_ns(v)); });
  };
  auto str_of = [&](std::string_view section, const std::string& key, std::string& out) {
    if (auto [s, has] = get(section, key); has) out = s->entries.at(key).value;
  };
  auto strlist_of = [&](std::string_view section, const std::string& key, std::vector<std::string>& out) {
    if (auto [s, has] = get(section, key); has) out = rd.with(*s, key, [](const std::string& v) { return split_list(v); });
  };
  auto sizelist_of = [&](std::string_view section, const std::string& key, std::vector<std::uint64_t>& out) {
    if (auto [s, has] = get(section, key); has)
      out = rd.with(*s, key, [](const std::string& v) {
        std::vector<std::uint64_t> r;
        for (const auto& e : split_list(v)) r.push_back(parse_size(e));
        return r;
      });
  };
  auto uintlist_of = [&](std::string_view section, const std::string& key, std::vector<std::uint64_t>& out) {
    if (auto [s, has] = get(section, key); has)
      out = rd.with(*s, key, [](const std::string& v) {
        std::vector<std::uint64_t> r;
        for (const auto& e : split_list(v)) r.push_back(parse_uint_value(e));
        return r;
      });
  };
  auto fail_at = [&](std::string_view section, const std::string& key, const std::string& msg) -> ConfigError {
    const IniSection* s = f.find(section);
    const std::size_t line = s ? (s->entries.contains(key) ? s->entries.at(key).line : s->line) : 0;
    return ConfigError(at_line(f.source, line, msg));
  };

  str_of("experiment", "kind", c.kind);
  if (c.kind.empty()) throw fail_at("experiment", "kind", "[experiment] kind is required");
  if (std::find(experiment_kinds().begin(), experiment_kinds().end(), c.kind) == experiment_kinds().end())
    throw fail_at("experiment", "kind", "unknown experiment kind '" + c.kind + "'");
  str_of("experiment", "name", c.name);
  uint_of("experiment", "seed", c.seed);

  str_of("output", "dir", c.output.dir);
  str_of("output", "format", c.output.format);
  if (c.output.format != "csv" && c.output.format != "json" && c.output.format != "both")
    throw fail_at("output", "format", "format must be csv, json or both");
  str_of("output", "normalize_to", c.output.normalize_to);

  uint_of("host", "mlp_window", c.host.mlp_window);
  itime_of("host", "issue_interval", c.host.issue_interval);
  if (auto [s, has] = get("host", "fence_drain"); has)
    c.host.fence_drain = rd.with(*s, "fence_drain", [](const std::string& v) { return parse_bool(v); });
  if (c.host.mlp_window < 1) throw fail_at("host", "mlp_window", "mlp_window must be >= 1");

  size_of("device", "capacity", c.device.capacity_bytes);
  size_of("device", "cache_capacity", c.device.cache_capacity_bytes);
  uint_of("device", "ways", c.device.ways);
  LatencyModel& lm = c.device.latency;
  time_of("device", "t_link_rt", lm.t_link_rt);
  time_of("device", "t_ctrl", lm.t_ctrl);
  time_of("device", "t_tag", lm.t_tag);
  time_of("device", "t_data", lm.t_data);
  time_of("device", "t_write_txn", lm.t_write_txn);
  time_of("device", "ii_read", lm.ii_read);
  time_of("device", "ii_write", lm.ii_write);

  itime_of("flash", "read_service", c.device.flash.read_service);
  itime_of("flash", "write_service", c.device.flash.write_service);
  uint_of("flash", "channels", c.device.flash.channels);
  uint_of("flash", "queue_capacity", c.device.flash.queue_capacity);
  if (auto [s, has] = get("flash", "jitter"); has)
    c.device.flash.jitter = rd.with(*s, "jitter", [](const std::string& v) { return parse_double_value(v); });
  c.device.flash.jitter_seed = derive_seed(c.seed, 0xf1a5);

  try {
    c.device.validate();
    DeviceCacheState probe_geometry(c.device.cache_capacity_bytes, c.device.ways);
    (void)probe_geometry;
  } catch (const ConfigError& e) {
    throw fail_at("device", "cache_capacity", std::string("[device]/[flash]: ") + e.what());
  }

  // Topology: defaults, then overrides, then explicit [node.*] sections.
  FlatDramConfig local = FlatDramConfig::ddr5_local();
  FlatDramConfig remote = FlatDramConfig::ddr5_remote();
  itime_of("topology", "ddr5_local_read", local.read_latency);
  itime_of("topology", "ddr5_remote_read", remote.read_latency);
  itime_of("topology", "ddr5_local_write_txn", local.write_txn);
  itime_of("topology", "ddr5_remote_write_txn", remote.write_txn);
  itime_of("topology", "ddr5_local_posted_ack", local.posted_ack);
  itime_of("topology", "ddr5_remote_posted_ack", remote.posted_ack);
  if (auto [s, has] = get("topology", "ddr5_ii"); has) {
    itime_of("topology", "ddr5_ii", local.ii);
    remote.ii = local.ii;
  }
  if (auto [s, has] = get("topology", "ddr5_ports"); has) {
    uint_of("topology", "ddr5_ports", local.ports);
    remote.ports = local.ports;
  }
  str_of("topology", "policy", c.policy);

  bool any_node_section = false;
  for (const auto& sec : f.sections) {
    if (sec.name.rfind("node.", 0) != 0) continue;
    any_node_section = true;
    NodeSpec n;
    n.name = sec.name.substr(5);
    std::string kind = "flat";
    if (sec.entries.contains("kind")) kind = sec.entries.at("kind").value;
    if (kind == "cmmh") {
      n.kind = NodeKind::CmmH;
    } else if (kind == "flat") {
      n.kind = NodeKind::FlatDram;
      size_of(sec.name, "capacity", n.flat.capacity_bytes);
      itime_of(sec.name, "read_latency", n.flat.read_latency);
      itime_of(sec.name, "write_txn", n.flat.write_txn);
      itime_of(sec.name, "posted_ack", n.flat.posted_ack);
      itime_of(sec.name, "ii", n.flat.ii);
      uint_of(sec.name, "ports", n.flat.ports);
      try {
        n.flat.validate();
      } catch (const ConfigError& e) {
        throw ConfigError(at_line(f.source, sec.line, e.what()));
      }
    } else {
      throw fail_at(sec.name, "kind", "node kind must be flat or cmmh");
    }
    c.nodes.push_back(std::move(n));
  }
  if (!any_node_section) {
    c.nodes.push_back({"DDR5-L", NodeKind::FlatDram, local});
    c.nodes.push_back({"DDR5-R", NodeKind::FlatDram, remote});
    c.nodes.push_back({"CMM-H", NodeKind::CmmH, {}});
  }

  WorkloadConfig& w = c.workload;
  str_of("workload", "node", w.node);
  uint_of("workload", "batches", w.batches);
  uint_of("workload", "batch_width", w.batch_width);
  size_of("workload", "region_size", w.region_size);
  size_of("workload", "chase_region", w.chase_region);
  uint_of("workload", "chase_hops", w.chase_hops);
  uintlist_of("workload", "threads", w.threads);
  strlist_of("workload", "kinds", w.kinds);
  uint_of("workload", "lines_per_thread", w.lines_per_thread);
  uint_of("workload", "repetitions", w.repetitions);
  sizelist_of("workload", "region_sizes", w.region_sizes);
  uint_of("workload", "batches_per_size", w.batches_per_size);
  sizelist_of("workload", "footprints", w.footprints);
  uint_of("workload", "lookups", w.lookups);
  strlist_of("workload", "ratios", w.ratios);
  str_of("workload", "fast_node", w.fast_node);
  str_of("workload", "slow_node", w.slow_node);
  uint_of("workload", "ops", w.ops);
  uint_of("workload", "accesses_per_op", w.accesses_per_op);
  itime_of("workload", "op_compute", w.op_compute);
  strlist_of("workload", "patterns", w.patterns);
  size_of("workload", "value_size", w.value_size);
  uint_of("workload", "key_space", w.key_space);
  if (w.batch_width < 1) throw fail_at("workload", "batch_width", "batch_width must be >= 1");
  for (const auto& k : w.kinds)
    if (k != "ld" && k != "nt-ld" && k != "st" && k != "nt-st") throw fail_at("workload", "kinds", "unknown access kind '" + k + "'");
  for (auto t : w.threads)
    if (t < 1 || t > 1024) throw fail_at("workload", "threads", "thread counts must be in [1, 1024]");

  PersistenceConfig& p = c.persistence;
  uint_of("persistence", "plans", p.plans);
  uint_of("persistence", "trace_ops", p.trace_ops);
  uint_of("persistence", "num_regs", p.num_regs);
  uint_of("persistence", "max_region_len", p.max_region_len);
  if (auto [s, has] = get("persistence", "gpf_budget"); has) {
    const std::string v = s->entries.at("gpf_budget").value;
    if (detail::lower(v) != "unlimited") size_of("persistence", "gpf_budget", p.gpf_budget.emplace());
  }
  if (auto [s, has] = get("persistence", "scope"); has) {
    const std::string v = s->entries.at("scope").value;
    if (v == "host_and_device") p.host_in_persistent_domain = true;
    else if (v == "device_only") p.host_in_persistent_domain = false;
    else throw fail_at("persistence", "scope", "scope must be host_and_device or device_only");
  }
  uint_of("persistence", "stores", p.stores);
  itime_of("persistence", "barrier_cost", p.barrier_cost);
  str_of("persistence", "trace_file", p.trace_file);
  if (p.num_regs < 1 || p.num_regs > 256) throw fail_at("persistence", "num_regs", "num_regs must be in [1, 256]");
  if (p.max_region_len < 1) throw fail_at("persistence", "max_region_len", "max_region_len must be >= 1");
  return c;
}

inline ExperimentConfig parse_config(std::string_view text, std::string source = "<config>") {
  return build_config(parse_ini(text, std::move(source)));
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace cxlsim
