#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>

#include "cxlsim/device_cache.hpp"
#include "cxlsim/flash.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim {

/// Round a fractional nanosecond value half-up onto the integer time base.
inline SimTime round_ns(double ns) {
  if (ns < 0) throw ConfigError("negative latency component");
  return static_cast<SimTime>(std::floor(ns + 0.5));
}

/// Component delays of the hybrid device. Only sums are observable; the
/// split is a configuration choice. Defaults reproduce a 728.9 ns serialized
/// read hit, a 16-wide load batch near 56.7 ns per access, 114.9 ns for
/// temporal stores and 16.0 ns for posted non-temporal stores.
struct LatencyModel {
  double t_link_rt = 200.0;
  double t_ctrl = 300.0;
  double t_tag = 100.0;
  double t_data = 128.9;
  double t_write_txn = 869.0;
  double ii_read = 14.0;
  double ii_write = 16.0;

  void validate() const {
    for (double v : {t_link_rt, t_ctrl, t_tag, t_data, t_write_txn, ii_read, ii_write})
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("latency components must be finite and >= 0");
    if (round_ns(ii_read) == 0 || round_ns(ii_write) == 0) throw ConfigError("initiation intervals must be >= 1 ns");
  }

  /// Link + controller + tag lookup + data probe, sequential.
  SimTime read_hit() const { return round_ns(t_link_rt + t_ctrl + t_tag + t_data); }
  /// Portion of the read path before a miss is handed to flash.
  SimTime miss_prefix() const { return std::min(read_hit(), round_ns(t_link_rt / 2 + t_ctrl + t_tag)); }
  /// Portion after the fill completes (data probe and return link).
  SimTime miss_suffix() const { return read_hit() - miss_prefix(); }
  SimTime write_txn() const { return round_ns(t_write_txn); }
  SimTime read_ii() const { return round_ns(ii_read); }
  SimTime write_ii() const { return round_ns(ii_write); }
};

struct CmmhConfig {
  std::uint64_t capacity_bytes = 1 * TiB;        // host-visible (flash-backed) capacity
  std::uint64_t cache_capacity_bytes = 16 * GiB;  // device DRAM cache
  std::uint32_t ways = 8;
  LatencyModel latency;
  FlashConfig flash;

  void validate() const {
    latency.validate();
    flash.validate();
    if (capacity_bytes == 0 || capacity_bytes % kPageBytes != 0)
      throw ConfigError("device.capacity must be a positive multiple of 4096");
    if (capacity_bytes / kPageBytes - 1 > DeviceCacheState::kMaxPage)
      throw ConfigError("device.capacity exceeds 16 TiB");
  }
};

struct DeviceAccess {
  SimTime latency = 0;
  std::optional<PageId> evicted;
  bool hit = false;
};

/// Energy budget for a persistent flush, in bytes written to flash.
class FlushBudget {
 public:
  static FlushBudget unlimited() { return FlushBudget{}; }
  static FlushBudget bytes(std::uint64_t b) { return FlushBudget{b}; }

  bool is_unlimited() const { return !bytes_; }
  std::uint64_t pages() const {
    return bytes_ ? *bytes_ / kPageBytes : std::numeric_limits<std::uint64_t>::max();
  }

 private:
  FlushBudget() = default;
  explicit FlushBudget(std::uint64_t b) : bytes_(b) {}
  std::optional<std::uint64_t> bytes_;
};

struct FlushReport {
  std::uint64_t dirty_pages_flushed = 0;
  std::uint64_t bytes = 0;
  SimTime flush_time = 0;
  bool complete = true;
};

/// DRAM cache in front of a NAND backend. Tag lookup and data probe are
/// sequential; misses fetch a whole 4 KB page; dirty victims are written back
/// concurrently with the fill and the requester waits only on the fill.
class CmmhDevice {
 public:
  explicit CmmhDevice(CmmhConfig cfg = {})
      : cfg_((cfg.validate(), cfg)), cache_(cfg.cache_capacity_bytes, cfg.ways), flash_(cfg.flash) {}

  const CmmhConfig& config() const { return cfg_; }
  const LatencyModel& latency() const { return cfg_.latency; }
  std::uint64_t capacity_bytes() const { return cfg_.capacity_bytes; }

  std::optional<std::uint32_t> lookup(PageId p) const { return cache_.lookup(p); }

  DeviceAccess access_read(PageId page, std::uint32_t offset, SimTime now) {
    check_offset(offset);
    check_page(page);
    const ReadPath r = read_path(page, now);
    return DeviceAccess{r.done - now, r.evicted, r.hit};
  }

  DeviceAccess access_write(PageId page, std::uint32_t offset, SimTime now) {
    DeviceAccess out = access_read(page, offset, now);
    mark_dirty(page);
    out.latency += cfg_.latency.write_txn();
    return out;
  }

  /// Host-facing transaction entry point. Returns the absolute completion
  /// (for posted non-temporal stores: the device acknowledgement).
  SimTime access(const AccessRequest& req, SimTime now) {
    check_request(req);
    const PageId page = PageId::of_addr(req.addr);
    const auto offset = static_cast<std::uint32_t>(req.addr % kPageBytes);
    const LatencyModel& lm = cfg_.latency;
    switch (req.kind) {
      case AccessKind::TemporalLoad:
      case AccessKind::NonTemporalLoad: {
        const SimTime admit = admit_read(now);
        return admit + access_read(page, offset, admit).latency;
      }
      case AccessKind::TemporalStore: {
        // Read-for-ownership allocate, then a second (write) transaction.
        const SimTime admit = admit_read(now);
        const SimTime owned = admit + access_read(page, offset, admit).latency;
        const SimTime wadmit = admit_write(owned);
        mark_dirty(page);
        return wadmit + lm.write_txn();
      }
      case AccessKind::NonTemporalStore: {
        const SimTime wadmit = admit_write(now);
        const ReadPath r = read_path(page, wadmit);
        mark_dirty(page);
        // A full flash queue holds the posted write until its fill is queued.
        return std::max(wadmit + lm.write_ii(), r.accepted);
      }
    }
    return now;
  }

  /// Write back dirty blocks in set-major order until done or out of budget.
  FlushReport gpf_flush(SimTime now, FlushBudget budget,
                        const std::function<void(PageId)>& on_flushed = {}) {
    FlushReport rep;
    std::uint64_t remaining = budget.pages();
    SimTime last = now;
    for (std::uint64_t s = 0; s < cache_.num_sets(); ++s) {
      for (std::uint32_t w = 0; w < cache_.ways(); ++w) {
        CacheBlockMeta& b = cache_.block_at(s, w);
        if (!b.dirty) continue;
        if (remaining == 0) {
          rep.complete = false;
          continue;
        }
        const PageId page{b.tag};
        const FlashOp op = flash_.submit(FlashOpKind::WritePage, page, now);
        last = std::max(last, op.complete_time);
        b.dirty = false;
        --remaining;
        ++rep.dirty_pages_flushed;
        if (on_flushed) on_flushed(page);
      }
    }
    rep.bytes = rep.dirty_pages_flushed * kPageBytes;
    rep.flush_time = last - now;
    return rep;
  }

  double hit_rate() const { return cache_.hit_rate(); }
  void reset_stats() { cache_.reset_counters(); }

  const DeviceCacheState& cache() const { return cache_; }
  DeviceCacheState& cache() { return cache_; }
  const FlashBackend& flash() const { return flash_; }

  /// Mark a resident page dirty (write merge). No-op if not resident.
  void mark_dirty(PageId page) {
    if (auto w = cache_.lookup(page)) cache_.block(page, *w).dirty = true;
  }

 private:
  struct ReadPath {
    SimTime done = 0;
    SimTime accepted = 0;
    std::optional<PageId> evicted;
    bool hit = false;
  };

  ReadPath read_path(PageId page, SimTime now) {
    const TouchResult t = cache_.touch(page);
    CacheBlockMeta& blk = cache_.block(page, t.way);
    const LatencyModel& lm = cfg_.latency;
    ReadPath r;
    r.hit = t.hit;
    r.accepted = now;
    if (t.hit) {
      r.done = std::max(now + lm.read_hit(), blk.ready_at + lm.miss_suffix());
      return r;
    }
    const SimTime handoff = now + lm.miss_prefix();
    const FlashOp fill = flash_.submit(FlashOpKind::ReadPage, page, handoff);
    if (t.evicted) {
      r.evicted = t.evicted->page;
      if (t.evicted->dirty) flash_.submit(FlashOpKind::WritePage, t.evicted->page, handoff);
    }
    blk.ready_at = fill.complete_time;
    r.done = fill.complete_time + lm.miss_suffix();
    if (fill.enqueue_time > handoff) r.accepted = now + (fill.enqueue_time - handoff);
    return r;
  }

  SimTime admit_read(SimTime now) {
    const SimTime admit = std::max(now, read_port_free_);
    read_port_free_ = admit + cfg_.latency.read_ii();
    return admit;
  }

  SimTime admit_write(SimTime now) {
    const SimTime admit = std::max(now, write_port_free_);
    write_port_free_ = admit + cfg_.latency.write_ii();
    return admit;
  }

  static void check_offset(std::uint32_t offset) {
    if (offset >= kPageBytes) throw ConfigError("page offset out of range");
  }

  void check_page(PageId p) const {
    if (p.base_addr() >= cfg_.capacity_bytes) throw ConfigError("page beyond device capacity");
  }

  void check_request(const AccessRequest& req) const {
    if (req.size != kLineBytes) throw ConfigError("access size must be 64 bytes");
    if (req.addr >= cfg_.capacity_bytes || cfg_.capacity_bytes - req.addr < req.size)
      throw ConfigError("address beyond device capacity");
  }

  CmmhConfig cfg_;
  DeviceCacheState cache_;
  FlashBackend flash_;
  SimTime read_port_free_ = 0;
  SimTime write_port_free_ = 0;
};

}  // namespace cxlsim
