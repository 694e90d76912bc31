#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cxlsim/types.hpp"

namespace cxlsim {

struct CacheBlockMeta {
  SimTime ready_at = 0;      // fill completion; hits before this wait for it
  std::uint32_t tag = 0;     // full PageId of the resident page
  std::uint8_t recency = 0;  // 0 = MRU
  bool valid = false;
  bool dirty = false;
};

struct CacheCounters {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions_clean = 0;
  std::uint64_t evictions_dirty = 0;

  std::uint64_t lookups() const { return hits + misses; }
};

struct Eviction {
  PageId page;
  bool dirty = false;
};

/// Outcome of touching one page in the tag store.
struct TouchResult {
  bool hit = false;
  std::uint32_t way = 0;
  std::optional<Eviction> evicted;
};

/// Set-associative, page-granular tag store with LRU replacement and MRU
/// insertion. Set index is the low-order page number bits (page mod sets).
class DeviceCacheState {
 public:
  static constexpr std::uint64_t kMaxPage = 0xffffffffULL;

  DeviceCacheState(std::uint64_t capacity_bytes, std::uint32_t ways) : ways_(ways) {
    if (ways == 0 || ways > 255) throw ConfigError("device.ways must be in [1, 255]");
    const std::uint64_t per_set = static_cast<std::uint64_t>(ways) * kPageBytes;
    if (capacity_bytes == 0 || capacity_bytes % per_set != 0)
      throw ConfigError("device.cache_capacity must be a positive multiple of ways x 4096");
    num_sets_ = capacity_bytes / per_set;
    blocks_.resize(num_sets_ * ways_);
  }

  std::uint64_t num_sets() const { return num_sets_; }
  std::uint32_t ways() const { return ways_; }
  std::uint64_t capacity_bytes() const { return num_sets_ * ways_ * kPageBytes; }
  std::uint64_t set_of(PageId p) const { return p.value % num_sets_; }

  /// Pure query.
  std::optional<std::uint32_t> lookup(PageId p) const {
    if (p.value > kMaxPage) throw ConfigError("page number exceeds tag width");
    const CacheBlockMeta* set = set_ptr(set_of(p));
    for (std::uint32_t w = 0; w < ways_; ++w)
      if (set[w].valid && set[w].tag == p.value) return w;
    return std::nullopt;
  }

  /// Access `p`: on hit promote to MRU; on miss evict the LRU block if the
  /// set is full and insert at MRU. Counters are updated.
  TouchResult touch(PageId p) {
    const std::uint64_t s = set_of(p);
    CacheBlockMeta* set = set_ptr(s);
    TouchResult r;
    if (auto w = lookup(p)) {
      ++counters_.hits;
      promote(set, *w);
      r.hit = true;
      r.way = *w;
      return r;
    }
    ++counters_.misses;
    std::uint32_t target = ways_;
    for (std::uint32_t w = 0; w < ways_; ++w) {
      if (!set[w].valid) { target = w; break; }
    }
    if (target == ways_) {
      for (std::uint32_t w = 0; w < ways_; ++w) {
        if (set[w].recency == ways_ - 1) { target = w; break; }
      }
      CacheBlockMeta& victim = set[target];
      r.evicted = Eviction{PageId{victim.tag}, victim.dirty};
      if (victim.dirty) ++counters_.evictions_dirty; else ++counters_.evictions_clean;
      // Victim holds the largest rank, so every other block ages by one.
      for (std::uint32_t w = 0; w < ways_; ++w)
        if (w != target) ++set[w].recency;
    } else {
      for (std::uint32_t w = 0; w < ways_; ++w)
        if (set[w].valid) ++set[w].recency;
    }
    set[target] = CacheBlockMeta{0, static_cast<std::uint32_t>(p.value), 0, true, false};
    r.way = target;
    return r;
  }

  CacheBlockMeta& block(PageId p, std::uint32_t way) { return set_ptr(set_of(p))[way]; }
  const CacheBlockMeta& block_at(std::uint64_t set, std::uint32_t way) const { return set_ptr(set)[way]; }
  CacheBlockMeta& block_at(std::uint64_t set, std::uint32_t way) { return set_ptr(set)[way]; }

  const CacheCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }

  double hit_rate() const {
    if (counters_.lookups() == 0) throw StatisticError("hit rate undefined: no lookups recorded");
    return static_cast<double>(counters_.hits) / static_cast<double>(counters_.lookups());
  }

  std::uint64_t resident_pages() const {
    std::uint64_t n = 0;
    for (const auto& b : blocks_) n += b.valid ? 1 : 0;
    return n;
  }

  std::uint64_t dirty_pages() const {
    std::uint64_t n = 0;
    for (const auto& b : blocks_) n += b.dirty ? 1 : 0;
    return n;
  }

 private:
  CacheBlockMeta* set_ptr(std::uint64_t s) { return blocks_.data() + s * ways_; }
  const CacheBlockMeta* set_ptr(std::uint64_t s) const { return blocks_.data() + s * ways_; }

  void promote(CacheBlockMeta* set, std::uint32_t way) {
    const std::uint8_t old = set[way].recency;
    for (std::uint32_t w = 0; w < ways_; ++w)
      if (set[w].valid && set[w].recency < old) ++set[w].recency;
    set[way].recency = 0;
  }

  std::uint32_t ways_;
  std::uint64_t num_sets_ = 0;
  std::vector<CacheBlockMeta> blocks_;
  CacheCounters counters_;
};

}  // namespace cxlsim
