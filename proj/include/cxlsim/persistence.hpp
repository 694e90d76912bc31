#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cxlsim/cmmh.hpp"
#include "cxlsim/engine.hpp"
#include "cxlsim/random.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim::persist {

using Reg = std::uint16_t;

inline constexpr std::uint64_t kWordBytes = 8;
/// User addresses live below this; checkpoint and log areas above it.
inline constexpr std::uint64_t kReservedBase = 0x4000'0000ULL;
inline constexpr std::uint64_t kCheckpointBase = kReservedBase;
inline constexpr std::uint64_t kLogBase = kReservedBase + 0x100'0000ULL;

enum class OpKind : std::uint8_t { Load, Store, Compute, CheckpointMarker };

/// One abstract machine operation at 8-byte granularity.
///   Load:    reg <- mem[addr]
///   Store:   mem[addr] <- (store_imm ? imm : reg)
///   Compute: reg <- imm + sum(srcs)
struct AbstractOp {
  OpKind kind = OpKind::CheckpointMarker;
  Reg reg = 0;
  std::uint64_t addr = 0;
  bool store_imm = false;
  std::uint64_t imm = 0;
  std::vector<Reg> srcs;

  static AbstractOp load(Reg dst, std::uint64_t addr) { return {OpKind::Load, dst, addr, false, 0, {}}; }
  static AbstractOp store(std::uint64_t addr, Reg src) { return {OpKind::Store, src, addr, false, 0, {}}; }
  static AbstractOp store_const(std::uint64_t addr, std::uint64_t v) { return {OpKind::Store, 0, addr, true, v, {}}; }
  static AbstractOp compute(Reg dst, std::vector<Reg> srcs, std::uint64_t imm = 0) {
    return {OpKind::Compute, dst, 0, false, imm, std::move(srcs)};
  }
  static AbstractOp marker() { return {}; }

  friend bool operator==(const AbstractOp&, const AbstractOp&) = default;
};

using OpTrace = std::vector<AbstractOp>;

// ---------------------------------------------------------------------------
// Text format: one op per line, '#' starts a comment.
//   LOAD r1 0x100
//   STORE 0x108 r1        STORE 0x108 42
//   COMPUTE r2 r1 r3 [imm]
//   CHECKPOINT

namespace detail {

inline std::uint64_t parse_number(std::string_view tok, std::size_t line) {
  std::uint64_t v = 0;
  int base = 10;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    tok.remove_prefix(2);
    base = 16;
  }
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ConfigError("line " + std::to_string(line) + ": bad number '" + std::string(tok) + "'");
  return v;
}

inline bool is_reg(std::string_view tok) { return tok.size() > 1 && (tok[0] == 'r' || tok[0] == 'R'); }

inline Reg parse_reg(std::string_view tok, std::size_t line) {
  if (!is_reg(tok)) throw ConfigError("line " + std::to_string(line) + ": expected register, got '" + std::string(tok) + "'");
  const auto v = parse_number(tok.substr(1), line);
  if (v > 0xffff) throw ConfigError("line " + std::to_string(line) + ": register id too large");
  return static_cast<Reg>(v);
}

inline std::uint64_t parse_addr(std::string_view tok, std::size_t line) {
  const auto a = parse_number(tok, line);
  if (a % kWordBytes != 0) throw ConfigError("line " + std::to_string(line) + ": address not 8-byte aligned");
  return a;
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace detail

inline OpTrace parse_trace(std::string_view text) {
  OpTrace out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& op = tok[0];
    auto arity = [&](bool ok) {
      if (!ok) throw ConfigError("line " + std::to_string(line_no) + ": wrong operand count for " + op);
    };
    if (op == "LOAD") {
      arity(tok.size() == 3);
      out.push_back(AbstractOp::load(detail::parse_reg(tok[1], line_no), detail::parse_addr(tok[2], line_no)));
    } else if (op == "STORE") {
      arity(tok.size() == 3);
      const auto a = detail::parse_addr(tok[1], line_no);
      if (detail::is_reg(tok[2])) out.push_back(AbstractOp::store(a, detail::parse_reg(tok[2], line_no)));
      else out.push_back(AbstractOp::store_const(a, detail::parse_number(tok[2], line_no)));
    } else if (op == "COMPUTE") {
      arity(tok.size() >= 2);
      std::vector<Reg> srcs;
      std::uint64_t imm = 0;
      for (std::size_t i = 2; i < tok.size(); ++i) {
        if (detail::is_reg(tok[i])) srcs.push_back(detail::parse_reg(tok[i], line_no));
        else if (i + 1 == tok.size()) imm = detail::parse_number(tok[i], line_no);
        else throw ConfigError("line " + std::to_string(line_no) + ": immediate must be the last operand");
      }
      out.push_back(AbstractOp::compute(detail::parse_reg(tok[1], line_no), std::move(srcs), imm));
    } else if (op == "CHECKPOINT") {
      arity(tok.size() == 1);
      out.push_back(AbstractOp::marker());
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown op '" + op + "'");
    }
  }
  return out;
}

inline std::string format_op(const AbstractOp& op) {
  switch (op.kind) {
    case OpKind::Load: return "LOAD r" + std::to_string(op.reg) + " " + detail::hex(op.addr);
    case OpKind::Store:
      return "STORE " + detail::hex(op.addr) + " " + (op.store_imm ? std::to_string(op.imm) : "r" + std::to_string(op.reg));
    case OpKind::Compute: {
      std::string s = "COMPUTE r" + std::to_string(op.reg);
      for (auto r : op.srcs) s += " r" + std::to_string(r);
      if (op.imm != 0) s += " " + std::to_string(op.imm);
      return s;
    }
    case OpKind::CheckpointMarker: return "CHECKPOINT";
  }
  return {};
}

inline std::string format_trace(const OpTrace& t) {
  std::string s;
  for (const auto& op : t) s += format_op(op) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Region formation

struct Region {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::vector<Reg> live_in;
  std::vector<Reg> live_out;

  std::size_t size() const { return end - start; }
  friend bool operator==(const Region&, const Region&) = default;
};

/// Registers live immediately before each op; entry n is the empty exit set.
inline std::vector<std::vector<Reg>> live_before(const OpTrace& trace) {
  std::vector<std::vector<Reg>> out(trace.size() + 1);
  std::set<Reg> live;
  for (std::size_t i = trace.size(); i-- > 0;) {
    const AbstractOp& op = trace[i];
    switch (op.kind) {
      case OpKind::Load: live.erase(op.reg); break;
      case OpKind::Store:
        if (!op.store_imm) live.insert(op.reg);
        break;
      case OpKind::Compute:
        live.erase(op.reg);
        live.insert(op.srcs.begin(), op.srcs.end());
        break;
      case OpKind::CheckpointMarker: break;
    }
    out[i].assign(live.begin(), live.end());
  }
  return out;
}

/// Greedy earliest-cut partition: a region ends right before any store to
/// an address already loaded inside it, before an explicit CHECKPOINT, or
/// when it reaches max_len ops.
inline std::vector<Region> form_regions(const OpTrace& trace, std::size_t max_len = 64) {
  if (trace.empty()) throw ConfigError("form_regions needs a non-empty trace");
  if (max_len == 0) throw ConfigError("max region length must be >= 1");
  std::vector<Region> regions;
  std::set<std::uint64_t> loaded;
  std::size_t start = 0;
  auto cut = [&](std::size_t at) {
    regions.push_back(Region{start, at, {}, {}});
    start = at;
    loaded.clear();
  };
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const AbstractOp& op = trace[i];
    const bool war = op.kind == OpKind::Store && loaded.contains(op.addr);
    const bool marker = op.kind == OpKind::CheckpointMarker;
    if (i > start && (war || marker || i - start >= max_len)) cut(i);
    if (op.kind == OpKind::Load) loaded.insert(op.addr);
  }
  cut(trace.size());
  const auto live = live_before(trace);
  for (auto& r : regions) {
    r.live_in = live[r.start];
    r.live_out = live[r.end];
  }
  return regions;
}

// ---------------------------------------------------------------------------
// Memory images and the abstract interpreter

/// Word-addressed memory; absent words read as zero.
using Image = std::map<std::uint64_t, std::uint64_t>;

inline std::uint64_t read_word(const Image& m, std::uint64_t addr) {
  auto it = m.find(addr);
  return it == m.end() ? 0 : it->second;
}

struct MachineConfig {
  std::uint32_t num_regs = 16;
  std::size_t max_region_len = 64;
  CmmhConfig device = small_device();

  static CmmhConfig small_device() {
    CmmhConfig c;
    c.capacity_bytes = 2 * GiB;
    c.cache_capacity_bytes = 8 * kPageBytes * 4;  // 4 sets x 8 ways
    return c;
  }
};

inline void validate_trace(const OpTrace& trace, const MachineConfig& mc) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& op = trace[i];
    auto bad = [&](const std::string& what) { throw ConfigError("op " + std::to_string(i) + ": " + what); };
    if ((op.kind == OpKind::Load || op.kind == OpKind::Store)) {
      if (op.addr % kWordBytes) bad("address not 8-byte aligned");
      if (op.addr >= kReservedBase) bad("address inside reserved checkpoint/log range");
    }
    if (op.kind != OpKind::CheckpointMarker && !(op.kind == OpKind::Store && op.store_imm) && op.reg >= mc.num_regs)
      bad("register out of range");
    for (auto r : op.srcs)
      if (r >= mc.num_regs) bad("register out of range");
  }
}

/// Flat-memory straight-line execution of ops [from, to).
inline void interpret(const OpTrace& trace, std::size_t from, std::size_t to, std::vector<std::uint64_t>& regs,
                      Image& mem) {
  for (std::size_t i = from; i < to; ++i) {
    const AbstractOp& op = trace[i];
    switch (op.kind) {
      case OpKind::Load: regs[op.reg] = read_word(mem, op.addr); break;
      case OpKind::Store: mem[op.addr] = op.store_imm ? op.imm : regs[op.reg]; break;
      case OpKind::Compute: {
        std::uint64_t v = op.imm;
        for (auto r : op.srcs) v += regs[r];
        regs[op.reg] = v;
        break;
      }
      case OpKind::CheckpointMarker: break;
    }
  }
}

// ---------------------------------------------------------------------------
// Crash plans and the persistence event log

enum class GpfScope : std::uint8_t {
  /// Host caches are volatile; only lines already evicted reach the device.
  DeviceOnly,
  /// Host caches are flushed to the device on power loss, then the device
  /// flushes its DRAM cache.
  HostAndDevice,
};

struct HostEviction {
  std::size_t at = 0;  // number of ops executed when the line drains
  std::uint64_t line = 0;
};

struct CrashPlan {
  std::size_t crash_point = 0;  // ops [0, crash_point) ran
  FlushBudget gpf_budget = FlushBudget::unlimited();
  std::vector<HostEviction> host_flush_order;
  GpfScope scope = GpfScope::HostAndDevice;
};

enum class EventKind : std::uint8_t { DataStore, CheckpointStore, LogAppend, Barrier, HostEvict };

struct PersistEvent {
  EventKind kind = EventKind::DataStore;
  std::size_t op_index = 0;
  std::uint64_t addr = 0;
  std::uint64_t value = 0;
};

struct EventLog {
  std::vector<PersistEvent> events;

  std::uint64_t count(EventKind k) const {
    return static_cast<std::uint64_t>(
        std::count_if(events.begin(), events.end(), [k](const PersistEvent& e) { return e.kind == k; }));
  }
  std::uint64_t persistent_writes() const {
    return count(EventKind::DataStore) + count(EventKind::CheckpointStore) + count(EventKind::LogAppend);
  }
};

// ---------------------------------------------------------------------------
// Checkpoint area: two alternating slots. Slot layout (words):
//   [0] region id + 1 (0 = empty)   [1] checksum   [2 + r] register r

inline std::uint64_t slot_base(std::uint32_t slot, std::uint32_t num_regs) {
  const std::uint64_t words = 2 + num_regs;
  const std::uint64_t bytes = (words * kWordBytes + kLineBytes - 1) / kLineBytes * kLineBytes;
  return kCheckpointBase + slot * bytes;
}

inline std::uint64_t checkpoint_checksum(std::size_t region, const std::vector<Reg>& regs,
                                         const std::vector<std::uint64_t>& values) {
  std::uint64_t h = splitmix64(region + 1);
  for (std::size_t i = 0; i < regs.size(); ++i) h = splitmix64(h ^ splitmix64(regs[i] * 0x9e37ULL + values[i]));
  return h;
}

// ---------------------------------------------------------------------------

struct FinalState {
  Image memory;
  std::vector<std::uint64_t> regs;
};

struct CrashImage {
  Image image;
  FlushReport gpf;
  std::size_t crash_point = 0;
};

/// Abstract machine over simulated persistent memory: volatile registers,
/// a volatile host cache of dirty 64 B lines, and the hybrid device (DRAM
/// cache metadata from the device model, contents in word images).
class PersistentMachine {
 public:
  PersistentMachine(const MachineConfig& mc, const Image& initial)
      : mc_(mc), regs_(mc.num_regs, 0), device_(mc.device), device_view_(initial), flash_(initial) {}

  const MachineConfig& config() const { return mc_; }
  std::vector<std::uint64_t>& regs() { return regs_; }
  const Image& flash_image() const { return flash_; }
  const EventLog& log() const { return log_; }
  const CmmhDevice& device() const { return device_; }
  std::size_t dirty_host_lines() const { return host_.size(); }

  std::uint64_t load(std::uint64_t addr) const {
    auto l = host_.find(line_of(addr));
    if (l != host_.end()) {
      auto w = l->second.find(addr);
      if (w != l->second.end()) return w->second;
    }
    return read_word(device_view_, addr);
  }

  void store(std::uint64_t addr, std::uint64_t value, EventKind kind, std::size_t op_index) {
    host_[line_of(addr)][addr] = value;
    log_.events.push_back({kind, op_index, addr, value});
  }

  void barrier(std::size_t op_index) { log_.events.push_back({EventKind::Barrier, op_index, 0, 0}); }

  /// Write a dirty host line back to the device; no-op if clean.
  void drain_line(std::uint64_t line, std::size_t op_index) {
    auto it = host_.find(line);
    if (it == host_.end()) return;
    const PageId page = PageId::of_addr(line * kLineBytes);
    const TouchResult t = device_.cache().touch(page);
    if (t.evicted && t.evicted->dirty) write_back(t.evicted->page);
    for (const auto& [a, v] : it->second) device_view_[a] = v;
    device_.mark_dirty(page);
    log_.events.push_back({EventKind::HostEvict, op_index, line * kLineBytes, 0});
    host_.erase(it);
  }

  void drain_all(std::size_t op_index) {
    while (!host_.empty()) drain_line(host_.begin()->first, op_index);
  }

  /// Power failure: registers and (per scope) host lines are lost, then the
  /// device flushes dirty blocks within the energy budget.
  CrashImage crash(GpfScope scope, FlushBudget budget, std::size_t crash_point) {
    if (scope == GpfScope::HostAndDevice) drain_all(crash_point);
    host_.clear();
    std::fill(regs_.begin(), regs_.end(), 0);
    CrashImage out;
    out.gpf = device_.gpf_flush(0, budget, [this](PageId p) { write_back(p); });
    out.image = flash_;
    out.crash_point = crash_point;
    return out;
  }

  /// Clean shutdown: everything reaches flash.
  FinalState shutdown(std::size_t op_index) {
    drain_all(op_index);
    device_.gpf_flush(0, FlushBudget::unlimited(), [this](PageId p) { write_back(p); });
    return FinalState{flash_, regs_};
  }

  void write_checkpoint(std::size_t region, const std::vector<Reg>& live, std::size_t op_index) {
    const auto slot = static_cast<std::uint32_t>(region % 2);
    const std::uint64_t base = slot_base(slot, mc_.num_regs);
    std::vector<std::uint64_t> values;
    for (auto r : live) {
      values.push_back(regs_[r]);
      store(base + (2 + r) * kWordBytes, regs_[r], EventKind::CheckpointStore, op_index);
    }
    store(base + kWordBytes, checkpoint_checksum(region, live, values), EventKind::CheckpointStore, op_index);
    store(base, region + 1, EventKind::CheckpointStore, op_index);
  }

 private:
  void write_back(PageId page) {
    const std::uint64_t lo = page.base_addr();
    const std::uint64_t hi = lo + kPageBytes;
    for (auto it = flash_.lower_bound(lo); it != flash_.end() && it->first < hi;) it = flash_.erase(it);
    for (auto it = device_view_.lower_bound(lo); it != device_view_.end() && it->first < hi; ++it)
      flash_[it->first] = it->second;
  }

  MachineConfig mc_;
  std::vector<std::uint64_t> regs_;
  std::map<std::uint64_t, std::map<std::uint64_t, std::uint64_t>> host_;  // line -> words
  CmmhDevice device_;
  Image device_view_;  // flash overlaid with device-cache contents
  Image flash_;
  EventLog log_;
};

/// Persistent image a program starts from: user data plus the checkpoint of
/// region 0's live-in registers.
inline Image initial_image(const Image& user, const std::vector<Region>& regions,
                           const std::vector<std::uint64_t>& regs, std::uint32_t num_regs) {
  Image img = user;
  const std::uint64_t base = slot_base(0, num_regs);
  std::vector<std::uint64_t> values;
  for (auto r : regions.front().live_in) {
    values.push_back(regs.at(r));
    img[base + (2 + r) * kWordBytes] = regs.at(r);
  }
  img[base + kWordBytes] = checkpoint_checksum(0, regions.front().live_in, values);
  img[base] = 1;
  return img;
}

struct Execution {
  EventLog log;
  std::size_t executed = 0;
  std::optional<CrashImage> crash;
  std::optional<FinalState> final_state;
};

namespace detail {

inline void run_op(PersistentMachine& m, const AbstractOp& op, std::size_t i) {
  auto& regs = m.regs();
  switch (op.kind) {
    case OpKind::Load: regs[op.reg] = m.load(op.addr); break;
    case OpKind::Store: m.store(op.addr, op.store_imm ? op.imm : regs[op.reg], EventKind::DataStore, i); break;
    case OpKind::Compute: {
      std::uint64_t v = op.imm;
      for (auto r : op.srcs) v += regs[r];
      regs[op.reg] = v;
      break;
    }
    case OpKind::CheckpointMarker: break;
  }
}

/// Runs regions [first_region, ...) until the end or the plan's crash point.
inline Execution run_regions(PersistentMachine& m, const OpTrace& trace, const std::vector<Region>& regions,
                             std::size_t first_region, const CrashPlan* plan) {
  std::vector<HostEviction> evictions;
  if (plan) {
    evictions = plan->host_flush_order;
    std::stable_sort(evictions.begin(), evictions.end(),
                     [](const HostEviction& a, const HostEviction& b) { return a.at < b.at; });
  }
  std::size_t next_evict = 0;
  Execution ex;
  for (std::size_t k = first_region; k < regions.size(); ++k) {
    const Region& r = regions[k];
    for (std::size_t i = r.start; i < r.end; ++i) {
      while (next_evict < evictions.size() && evictions[next_evict].at <= i)
        m.drain_line(evictions[next_evict++].line, i);
      if (plan && i == plan->crash_point) {
        ex.crash = m.crash(plan->scope, plan->gpf_budget, i);
        ex.log = m.log();
        ex.executed = i;
        return ex;
      }
      if (i == r.start && k != 0) m.write_checkpoint(k, r.live_in, i);
      run_op(m, trace[i], i);
    }
  }
  const std::size_t n = trace.size();
  while (next_evict < evictions.size()) m.drain_line(evictions[next_evict++].line, n);
  if (plan && plan->crash_point >= n) {
    ex.crash = m.crash(plan->scope, plan->gpf_budget, n);
  } else {
    ex.final_state = m.shutdown(n);
  }
  ex.log = m.log();
  ex.executed = n;
  return ex;
}

}  // namespace detail

inline void check_partition(const OpTrace& trace, const std::vector<Region>& regions) {
  if (regions.empty() || regions.front().start != 0 || regions.back().end != trace.size())
    throw ConfigError("regions do not cover the trace");
  for (std::size_t k = 0; k < regions.size(); ++k) {
    if (regions[k].end <= regions[k].start) throw ConfigError("empty region");
    if (k > 0 && regions[k].start != regions[k - 1].end) throw ConfigError("regions are not contiguous");
  }
}

/// Crash-free run (plan == nullptr) or a run that stops at the plan's crash point.
inline Execution execute(const OpTrace& trace, const std::vector<Region>& regions, PersistentMachine& m,
                         const CrashPlan* plan = nullptr) {
  if (trace.empty()) {
    Execution ex;
    if (plan) ex.crash = m.crash(plan->scope, plan->gpf_budget, 0);
    else ex.final_state = m.shutdown(0);
    return ex;
  }
  check_partition(trace, regions);
  if (plan && plan->crash_point > trace.size()) throw ConfigError("crash point beyond trace");
  return detail::run_regions(m, trace, regions, 0, plan);
}

/// Run with `plan` and return the post-crash persistent image.
inline CrashImage inject_crash(const OpTrace& trace, const std::vector<Region>& regions, const MachineConfig& mc,
                               const Image& initial, const std::vector<std::uint64_t>& initial_regs,
                               const CrashPlan& plan) {
  PersistentMachine m(mc, initial);
  m.regs() = initial_regs;
  m.regs().resize(mc.num_regs, 0);
  Execution ex = execute(trace, regions, m, &plan);
  return *ex.crash;
}

struct CheckpointRecord {
  std::size_t region = 0;
  std::vector<std::uint64_t> regs;
};

/// Latest checkpoint slot whose checksum matches; throws when none does.
inline CheckpointRecord read_checkpoint(const Image& image, const std::vector<Region>& regions,
                                        std::uint32_t num_regs) {
  std::optional<CheckpointRecord> best;
  for (std::uint32_t slot = 0; slot < 2; ++slot) {
    const std::uint64_t base = slot_base(slot, num_regs);
    const std::uint64_t id = read_word(image, base);
    if (id == 0 || id > regions.size()) continue;
    const std::size_t k = id - 1;
    if (k % 2 != slot) continue;
    std::vector<std::uint64_t> values;
    CheckpointRecord rec{k, std::vector<std::uint64_t>(num_regs, 0)};
    for (auto r : regions[k].live_in) {
      values.push_back(read_word(image, base + (2 + r) * kWordBytes));
      rec.regs[r] = values.back();
    }
    if (read_word(image, base + kWordBytes) != checkpoint_checksum(k, regions[k].live_in, values)) continue;
    if (!best || k > best->region) best = std::move(rec);
  }
  if (!best) throw UnrecoverableError("no valid checkpoint in persistent image");
  return *best;
}

/// Reload live-ins from the newest checkpoint and re-execute from the start
/// of the interrupted region to the end of the trace.
inline FinalState recover_replay(const Image& image, const OpTrace& trace, const std::vector<Region>& regions,
                                 const MachineConfig& mc) {
  check_partition(trace, regions);
  const CheckpointRecord cp = read_checkpoint(image, regions, mc.num_regs);
  PersistentMachine m(mc, image);
  m.regs() = cp.regs;
  Execution ex = detail::run_regions(m, trace, regions, cp.region, nullptr);
  return *ex.final_state;
}

struct VerifyResult {
  bool consistent = true;
  std::optional<std::uint64_t> first_difference;  // byte address
};

/// Byte-wise comparison of two images (absent bytes are zero).
inline VerifyResult verify(const Image& actual, const Image& oracle) {
  std::set<std::uint64_t> words;
  for (const auto& [a, v] : actual) words.insert(a);
  for (const auto& [a, v] : oracle) words.insert(a);
  for (auto w : words) {
    const std::uint64_t x = read_word(actual, w);
    const std::uint64_t y = read_word(oracle, w);
    if (x == y) continue;
    for (std::uint64_t b = 0; b < kWordBytes; ++b)
      if (((x >> (8 * b)) & 0xff) != ((y >> (8 * b)) & 0xff)) return {false, w + b};
  }
  return {};
}

/// Only the user address range (below the reserved checkpoint/log area).
inline Image user_view(const Image& img) {
  return Image(img.begin(), img.lower_bound(kReservedBase));
}

// ---------------------------------------------------------------------------
// Scenarios and generators

/// Singly-linked list insertion at the head: new.next = head.next (str A),
/// then head.next = new (str B).
struct LinkedListScenario {
  static constexpr std::uint64_t kHeadNext = 0x100;
  static constexpr std::uint64_t kNodeN = 0x2c0;
  static constexpr std::uint64_t kNewNext = 0x300;
  static constexpr std::uint64_t kNewNode = 0x300;

  OpTrace trace;
  Image user;
  std::vector<std::uint64_t> regs;

  static LinkedListScenario make(std::uint32_t num_regs = 16) {
    LinkedListScenario s;
    s.trace = {
        AbstractOp::load(1, kHeadNext),              // r1 = head.next (N)
        AbstractOp::store(kNewNext, 1),              // str A: new.next = N
        AbstractOp::store_const(kHeadNext, kNewNode) // str B: head.next = new
    };
    s.user = {{kHeadNext, kNodeN}, {kNodeN, 0}, {kNewNext, 0}};
    s.regs.assign(num_regs, 0);
    return s;
  }

  /// str B's line reaches the device before the crash; str A's never does.
  static CrashPlan str_b_first_plan() {
    CrashPlan p;
    p.crash_point = 3;
    p.scope = GpfScope::DeviceOnly;
    p.host_flush_order = {{3, line_of(kHeadNext)}};
    return p;
  }
};

struct RandomTraceParams {
  std::size_t n_ops = 200;
  std::uint32_t n_words = 48;  // distinct user addresses
  std::uint32_t n_regs = 8;
  std::uint32_t word_stride = 8 * 9;  // spreads words over lines and pages
  std::uint64_t page_spread = 5;      // pages between address clusters
};

inline std::uint64_t random_trace_addr(std::uint32_t word, const RandomTraceParams& p) {
  // Groups of 8 words share a page; groups land `page_spread` pages apart.
  const std::uint64_t group = word / 8;
  return group * p.page_spread * kPageBytes + (word % 8) * p.word_stride;
}

inline OpTrace random_trace(const RandomTraceParams& p, std::uint64_t seed) {
  Rng rng(seed);
  OpTrace t;
  t.reserve(p.n_ops);
  for (std::size_t i = 0; i < p.n_ops; ++i) {
    const auto addr = random_trace_addr(static_cast<std::uint32_t>(rng.below(p.n_words)), p);
    const auto reg = static_cast<Reg>(rng.below(p.n_regs));
    switch (rng.below(10)) {
      case 0: case 1: case 2: t.push_back(AbstractOp::load(reg, addr)); break;
      case 3: case 4: case 5: t.push_back(AbstractOp::store(addr, reg)); break;
      case 6: t.push_back(AbstractOp::store_const(addr, rng.below(1000))); break;
      case 7: case 8:
        t.push_back(AbstractOp::compute(reg, {static_cast<Reg>(rng.below(p.n_regs)), static_cast<Reg>(rng.below(p.n_regs))},
                                        rng.below(7)));
        break;
      default:
        if (rng.below(8) == 0) t.push_back(AbstractOp::marker());
        else t.push_back(AbstractOp::compute(reg, {reg}, 1));
        break;
    }
  }
  return t;
}

/// Random crash point and a random drain order over the lines the trace
/// (and the checkpoint area) can dirty.
inline CrashPlan random_crash_plan(const OpTrace& trace, std::uint32_t num_regs, std::uint64_t seed,
                                   FlushBudget budget = FlushBudget::unlimited(),
                                   GpfScope scope = GpfScope::HostAndDevice) {
  Rng rng(seed);
  std::set<std::uint64_t> lines;
  for (const auto& op : trace)
    if (op.kind == OpKind::Store) lines.insert(line_of(op.addr));
  for (std::uint32_t s = 0; s < 2; ++s)
    for (std::uint64_t a = slot_base(s, num_regs); a < slot_base(s, num_regs) + (2 + num_regs) * kWordBytes; a += kLineBytes)
      lines.insert(line_of(a));
  std::vector<std::uint64_t> pool(lines.begin(), lines.end());
  CrashPlan p;
  p.crash_point = static_cast<std::size_t>(rng.below(trace.size() + 1));
  p.gpf_budget = budget;
  p.scope = scope;
  const std::size_t n_evict = pool.empty() ? 0 : rng.below(pool.size() * 3 + 1);
  for (std::size_t i = 0; i < n_evict; ++i)
    p.host_flush_order.push_back({static_cast<std::size_t>(rng.below(trace.size() + 1)), pool[rng.below(pool.size())]});
  return p;
}

// ---------------------------------------------------------------------------
// Write-ahead-log versus idempotent persistence

/// WAL mode: every Store appends a 16-byte (address, value) record to a
/// sequential log, waits on an ordering barrier, then updates in place.
inline EventLog wal_event_log(const OpTrace& trace, const MachineConfig& mc, const Image& initial,
                              const std::vector<std::uint64_t>& regs) {
  PersistentMachine m(mc, initial);
  m.regs() = regs;
  m.regs().resize(mc.num_regs, 0);
  std::uint64_t tail = kLogBase;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const AbstractOp& op = trace[i];
    if (op.kind == OpKind::Store) {
      const std::uint64_t v = op.store_imm ? op.imm : m.regs()[op.reg];
      m.store(tail, op.addr, EventKind::LogAppend, i);
      m.store(tail + kWordBytes, v, EventKind::LogAppend, i);
      tail += 2 * kWordBytes;
      m.barrier(i);
    }
    detail::run_op(m, op, i);
  }
  return m.log();
}

/// Idempotent mode: no log; live-out registers checkpointed per region.
inline EventLog idempotent_event_log(const OpTrace& trace, const std::vector<Region>& regions,
                                     const MachineConfig& mc, const Image& initial,
                                     const std::vector<std::uint64_t>& regs) {
  PersistentMachine m(mc, initial);
  m.regs() = regs;
  m.regs().resize(mc.num_regs, 0);
  return execute(trace, regions, m).log;
}

struct PersistenceCost {
  std::uint64_t persistent_writes = 0;
  std::uint64_t barriers = 0;
  SimTime sim_time = 0;
  std::uint64_t user_stores = 0;

  /// User stores per simulated second.
  double throughput() const {
    return sim_time == 0 ? 0.0 : static_cast<double>(user_stores) * 1e9 / static_cast<double>(sim_time);
  }
};

/// Replays the persistent writes of a log as posted 64 B writes to a CMM-H
/// device; each barrier drains outstanding writes and adds `barrier_cost`.
inline PersistenceCost cost_of(const EventLog& log, const CmmhConfig& device_cfg, const HostConfig& host,
                               SimTime barrier_cost = 0) {
  CmmhDevice dev(device_cfg);
  Engine<CmmhDevice> eng(dev, host);
  PersistenceCost c;
  std::vector<AccessRequest> pending;
  auto flush_pending = [&] {
    if (!pending.empty()) eng.run_batch(pending, host.mlp_window);
    pending.clear();
  };
  for (const auto& e : log.events) {
    switch (e.kind) {
      case EventKind::DataStore:
        ++c.user_stores;
        [[fallthrough]];
      case EventKind::CheckpointStore:
      case EventKind::LogAppend:
        ++c.persistent_writes;
        pending.push_back({0, AccessKind::NonTemporalStore, line_base(e.addr), kLineBytes, 0});
        break;
      case EventKind::Barrier:
        ++c.barriers;
        flush_pending();
        eng.fence(0);
        eng.advance(barrier_cost);
        break;
      case EventKind::HostEvict: break;
    }
  }
  flush_pending();
  c.sim_time = eng.fence(0);
  return c;
}

}  // namespace cxlsim::persist
