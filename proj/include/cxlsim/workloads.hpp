#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cxlsim/random.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim {

struct TraceEntry {
  AccessKind kind = AccessKind::TemporalLoad;
  std::uint64_t addr = 0;
  std::uint32_t thread_id = 0;

  AccessRequest request() const { return AccessRequest{thread_id, kind, addr, kLineBytes, 0}; }
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct Trace {
  std::vector<TraceEntry> entries;
  std::uint64_t footprint = 0;
  std::uint64_t seed = 0;
  std::string generator;

  std::vector<AccessRequest> requests() const {
    std::vector<AccessRequest> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.request());
    return out;
  }
  std::size_t size() const { return entries.size(); }
};

/// Random single-cycle permutation over the 64 B lines of a region
/// (Sattolo's algorithm), walked for `n_hops` dependent loads starting at
/// line 0. Consumers must issue it with window 1.
inline Trace gen_pointer_chase(std::uint64_t region_size, std::uint64_t n_hops, std::uint64_t seed) {
  if (region_size < kLineBytes) throw ConfigError("pointer chase region must hold at least one line");
  const std::uint64_t lines = region_size / kLineBytes;
  if (lines > 0xffffffffULL) throw ConfigError("pointer chase region too large");
  std::vector<std::uint32_t> next(lines);
  std::iota(next.begin(), next.end(), 0u);
  Rng rng(seed);
  for (std::uint64_t i = lines - 1; i > 0; --i) std::swap(next[i], next[rng.below(i)]);
  Trace t{{}, region_size, seed, "pointer_chase"};
  t.entries.reserve(n_hops);
  std::uint64_t at = 0;
  for (std::uint64_t h = 0; h < n_hops; ++h) {
    t.entries.push_back({AccessKind::TemporalLoad, at * kLineBytes, 0});
    at = next[at];
  }
  return t;
}

/// `n` distinct random lines within the region, one batch.
inline Trace gen_parallel_random(std::uint32_t n, std::uint64_t region_size, AccessKind kind, std::uint64_t seed,
                                 std::uint64_t base = 0, std::uint32_t thread_id = 0) {
  const std::uint64_t lines = region_size / kLineBytes;
  if (n == 0 || lines < n) throw ConfigError("parallel random region must hold n lines");
  Rng rng(seed);
  Trace t{{}, region_size, seed, "parallel_random"};
  t.entries.reserve(n);
  std::vector<std::uint64_t> picked;
  picked.reserve(n);
  while (picked.size() < n) {
    const std::uint64_t l = rng.below(lines);
    if (std::find(picked.begin(), picked.end(), l) != picked.end()) continue;
    picked.push_back(l);
    t.entries.push_back({kind, base + l * kLineBytes, thread_id});
  }
  return t;
}

/// One point of a tail-latency sweep. Batches are generated on demand so
/// the plan stays small for 10^5+ batches per point.
struct SweepPoint {
  std::uint64_t region_size = 0;
  std::uint64_t batches = 0;
  std::uint64_t seed = 0;
  std::uint32_t batch_width = 16;

  Trace batch(std::uint64_t i) const {
    return gen_parallel_random(batch_width, region_size, AccessKind::TemporalLoad, derive_seed(seed, i));
  }
};

struct SweepPlan {
  std::vector<SweepPoint> points;
  std::vector<std::string> warnings;
};

inline constexpr std::uint64_t kMinTailBatches = 100'000;
inline constexpr std::uint64_t kMinP99999Samples = 200'000;

/// Per-size parallel-random batches. Host-cache flushing between batches is
/// implicit: host caches are not modeled, every access reaches the device.
inline SweepPlan gen_tail_sweep(const std::vector<std::uint64_t>& region_sizes, std::uint64_t batches_per_size,
                                std::uint64_t seed, std::uint32_t batch_width = 16) {
  SweepPlan plan;
  if (batches_per_size < kMinTailBatches)
    plan.warnings.push_back("batches_per_size below 1e5: p99.99 is under-resolved");
  if (batches_per_size < kMinP99999Samples)
    plan.warnings.push_back("batches_per_size below 2e5: p99.999 will not be reported");
  for (std::size_t i = 0; i < region_sizes.size(); ++i) {
    if (region_sizes[i] < batch_width * std::uint64_t{kLineBytes})
      throw ConfigError("sweep region smaller than one batch");
    plan.points.push_back({region_sizes[i], batches_per_size, derive_seed(seed, 1000 + i), batch_width});
  }
  return plan;
}

/// Uniform-random 64 B reads over the footprint (irregular lookup shape).
inline Trace gen_irregular(std::uint64_t footprint, std::uint64_t n_lookups, std::uint64_t seed) {
  if (footprint < kPageBytes) throw ConfigError("irregular footprint must be >= 4 KB");
  const std::uint64_t lines = footprint / kLineBytes;
  Rng rng(seed);
  Trace t{{}, footprint, seed, "irregular"};
  t.entries.reserve(n_lookups);
  for (std::uint64_t i = 0; i < n_lookups; ++i)
    t.entries.push_back({AccessKind::TemporalLoad, rng.below(lines) * kLineBytes, 0});
  return t;
}

enum class KvPattern : std::uint8_t { FillSeq, FillRandom, ReadSeq, ReadRandom, DeleteSeq };

inline constexpr std::string_view to_string(KvPattern p) {
  switch (p) {
    case KvPattern::FillSeq: return "fillseq";
    case KvPattern::FillRandom: return "fillrandom";
    case KvPattern::ReadSeq: return "readseq";
    case KvPattern::ReadRandom: return "readrandom";
    case KvPattern::DeleteSeq: return "deleteseq";
  }
  return "?";
}

inline KvPattern parse_kv_pattern(std::string_view s) {
  for (auto p : {KvPattern::FillSeq, KvPattern::FillRandom, KvPattern::ReadSeq, KvPattern::ReadRandom,
                 KvPattern::DeleteSeq})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown kv pattern: " + std::string(s));
}

inline constexpr std::uint64_t kKvKeyBytes = 16;

/// Lines occupied by one key/value record.
inline std::uint64_t kv_record_lines(std::uint64_t value_size) {
  return (kKvKeyBytes + value_size + kLineBytes - 1) / kLineBytes;
}

/// Memory-access shape of a KV benchmark phase over `key_space` records
/// (defaults to n_ops). Each op touches every line of its record.
inline Trace gen_kv(KvPattern pattern, std::uint64_t n_ops, std::uint64_t value_size, std::uint64_t seed,
                    std::uint64_t key_space = 0) {
  if (n_ops == 0) throw ConfigError("kv n_ops must be >= 1");
  if (key_space == 0) key_space = n_ops;
  const std::uint64_t rec_lines = kv_record_lines(value_size);
  const std::uint64_t rec_bytes = rec_lines * kLineBytes;
  Rng rng(seed);
  Trace t{{}, key_space * rec_bytes, seed, std::string("kv_") + std::string(to_string(pattern))};
  t.entries.reserve(n_ops * rec_lines * (pattern == KvPattern::DeleteSeq ? 2 : 1));
  for (std::uint64_t i = 0; i < n_ops; ++i) {
    const bool random = pattern == KvPattern::FillRandom || pattern == KvPattern::ReadRandom;
    const std::uint64_t key = random ? rng.below(key_space) : i % key_space;
    const std::uint64_t base = key * rec_bytes;
    for (std::uint64_t l = 0; l < rec_lines; ++l) {
      const std::uint64_t a = base + l * kLineBytes;
      switch (pattern) {
        case KvPattern::FillSeq:
        case KvPattern::FillRandom: t.entries.push_back({AccessKind::TemporalStore, a, 0}); break;
        case KvPattern::ReadSeq:
        case KvPattern::ReadRandom: t.entries.push_back({AccessKind::TemporalLoad, a, 0}); break;
        case KvPattern::DeleteSeq:
          t.entries.push_back({AccessKind::TemporalLoad, a, 0});
          t.entries.push_back({AccessKind::TemporalStore, a, 0});
          break;
      }
    }
  }
  return t;
}

/// Registry used by the CLI's list-generators.
struct GeneratorInfo {
  std::string_view name;
  std::string_view params;
  std::string_view description;
};

inline const std::vector<GeneratorInfo>& generator_registry() {
  static const std::vector<GeneratorInfo> g{
      {"pointer_chase", "region_size, n_hops, seed", "dependent loads over a random single-cycle line permutation"},
      {"parallel_random", "n, region_size, kind, seed", "n distinct random lines issued as one parallel batch"},
      {"tail_sweep", "region_sizes, batches_per_size, seed", "parallel-random batches per region size"},
      {"irregular", "footprint, n_lookups, seed", "uniform-random 64 B reads over a footprint"},
      {"kv", "pattern, n_ops, value_size, seed",
       "fillseq | fillrandom | readseq | readrandom | deleteseq record access shapes"},
  };
  return g;
}

}  // namespace cxlsim
