#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cxlsim/cmmh.hpp"
#include "cxlsim/engine.hpp"
#include "cxlsim/random.hpp"
#include "cxlsim/workloads.hpp"
#include "reference_cache.hpp"

using namespace cxlsim;
using cxlsim_test::ReferenceCache;

namespace {

CmmhConfig cfg_with_cache(std::uint64_t cache) {
  CmmhConfig c;
  c.capacity_bytes = 64 * GiB;
  c.cache_capacity_bytes = cache;
  return c;
}

// Checks the per-set structural invariants of the tag store.
void expect_well_formed(const DeviceCacheState& c) {
  std::uint64_t resident = 0;
  for (std::uint64_t s = 0; s < c.num_sets(); ++s) {
    std::vector<int> ranks;
    for (std::uint32_t w = 0; w < c.ways(); ++w) {
      const auto& b = c.block_at(s, w);
      if (b.dirty) ASSERT_TRUE(b.valid);
      if (b.valid) ranks.push_back(b.recency);
    }
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t i = 0; i < ranks.size(); ++i) ASSERT_EQ(ranks[i], static_cast<int>(i)) << "set " << s;
    resident += ranks.size();
  }
  ASSERT_LE(resident, c.num_sets() * c.ways());
}

}  // namespace

TEST(DeviceCache, GeometryMatchesCapacity) {
  DeviceCacheState c(16 * GiB, 8);
  EXPECT_EQ(c.num_sets() * c.ways() * kPageBytes, 16 * GiB);
  EXPECT_THROW(DeviceCacheState(16 * GiB + kPageBytes, 8), ConfigError);
  EXPECT_THROW(DeviceCacheState(1 * MiB, 0), ConfigError);
}

TEST(DeviceCmmh, LookupOnFreshDeviceMisses) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  for (std::uint64_t p : {0ull, 1ull, 12345ull}) EXPECT_FALSE(dev.lookup(PageId{p}));
}

TEST(DeviceCmmh, LookupAfterReadHits) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  dev.access_read(PageId{42}, 0, 0);
  EXPECT_TRUE(dev.lookup(PageId{42}));
}

TEST(DeviceCmmh, LookupIsPure) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  dev.access_read(PageId{1}, 0, 0);
  const auto before = dev.cache().counters();
  const auto rec = dev.cache().block_at(dev.cache().set_of(PageId{1}), *dev.lookup(PageId{1})).recency;
  for (int i = 0; i < 10; ++i) dev.lookup(PageId{static_cast<std::uint64_t>(i)});
  EXPECT_EQ(dev.cache().counters().lookups(), before.lookups());
  EXPECT_EQ(dev.cache().block_at(dev.cache().set_of(PageId{1}), *dev.lookup(PageId{1})).recency, rec);
}

TEST(DeviceCmmh, NinthPageIntoOneSetEvictsTheFirst) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  const std::uint64_t sets = dev.cache().num_sets();
  for (std::uint64_t i = 1; i <= 9; ++i) dev.access_read(PageId{i * sets}, 0, i * 100'000);
  EXPECT_FALSE(dev.lookup(PageId{1 * sets}));
  for (std::uint64_t i = 2; i <= 9; ++i) EXPECT_TRUE(dev.lookup(PageId{i * sets})) << i;
}

TEST(DeviceCmmh, ReadHitLatencyIsTableValue) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  dev.access_read(PageId{3}, 0, 0);
  const auto r = dev.access_read(PageId{3}, 64, 1'000'000);
  EXPECT_TRUE(r.hit);
  EXPECT_NEAR(static_cast<double>(r.latency), 728.9, 0.5);
}

TEST(DeviceCmmh, MissWithIdleFlashCostsAtLeastHitPlusFlashRead) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  const auto r = dev.access_read(PageId{7}, 0, 0);
  EXPECT_FALSE(r.hit);
  EXPECT_GE(r.latency, dev.latency().read_hit() + dev.config().flash.read_service);
  EXPECT_GE(r.latency, 10'000u);  // tens of microseconds
}

TEST(DeviceCmmh, CleanVictimIsReportedWithoutFlashWrite) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  const std::uint64_t sets = dev.cache().num_sets();
  for (std::uint64_t i = 0; i < 8; ++i) dev.access_read(PageId{i * sets}, 0, i * 100'000);
  const auto r = dev.access_read(PageId{8 * sets}, 0, 1'000'000);
  ASSERT_TRUE(r.evicted);
  EXPECT_EQ(*r.evicted, PageId{0});
  EXPECT_EQ(dev.flash().writes(), 0u);
  EXPECT_EQ(dev.cache().counters().evictions_clean, 1u);
}

TEST(DeviceCmmh, WriteHitMarksDirtyWithoutFlashTraffic) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  dev.access_read(PageId{5}, 0, 0);
  const auto reads = dev.flash().reads();
  const auto w = dev.access_write(PageId{5}, 8, 1'000'000);
  EXPECT_TRUE(w.hit);
  EXPECT_EQ(w.latency, dev.latency().read_hit() + dev.latency().write_txn());
  const auto& blk = dev.cache().block_at(dev.cache().set_of(PageId{5}), *dev.lookup(PageId{5}));
  EXPECT_TRUE(blk.dirty);
  EXPECT_EQ(blk.recency, 0);
  EXPECT_EQ(dev.flash().reads(), reads);
  EXPECT_EQ(dev.flash().writes(), 0u);
}

TEST(DeviceCmmh, WriteMissWithDirtyVictimIssuesOneWriteAndOneRead) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  const std::uint64_t sets = dev.cache().num_sets();
  for (std::uint64_t i = 0; i < 8; ++i) dev.access_write(PageId{i * sets}, 0, i * 100'000);
  const auto r0 = dev.flash().reads(), w0 = dev.flash().writes();
  const auto w = dev.access_write(PageId{8 * sets}, 0, 2'000'000);
  ASSERT_TRUE(w.evicted);
  EXPECT_EQ(dev.flash().reads() - r0, 1u);
  EXPECT_EQ(dev.flash().writes() - w0, 1u);
  EXPECT_EQ(dev.cache().counters().evictions_dirty, 1u);
}

TEST(DeviceCmmh, DirtyVictimDoesNotDelayTheFill) {
  // Requester waits only on the fill read, so latency matches a clean miss.
  CmmhDevice clean(cfg_with_cache(1 * MiB)), dirty(cfg_with_cache(1 * MiB));
  const std::uint64_t sets = clean.cache().num_sets();
  for (std::uint64_t i = 0; i < 8; ++i) {
    clean.access_read(PageId{i * sets}, 0, i * 100'000);
    dirty.access_write(PageId{i * sets}, 0, i * 100'000);
  }
  EXPECT_EQ(clean.access_read(PageId{8 * sets}, 0, 2'000'000).latency,
            dirty.access_read(PageId{8 * sets}, 0, 2'000'000).latency);
}

TEST(DeviceCmmh, StoreAndPostedStoreBatchesMatchTable) {
  for (auto [kind, target] : {std::pair{AccessKind::TemporalStore, 114.9}, std::pair{AccessKind::NonTemporalStore, 16.0},
                              std::pair{AccessKind::NonTemporalLoad, 56.7}}) {
    CmmhDevice dev(cfg_with_cache(64 * MiB));
    Engine eng(dev);
    for (std::uint64_t p = 0; p < 256; ++p) dev.access_read(PageId{p}, 0, 0);
    eng.advance(10'000'000);
    const auto b = eng.run_batch(gen_parallel_random(16, 256 * kPageBytes, kind, 77).requests(), 16);
    EXPECT_NEAR(b.amortized_latency(), target, target * 0.10) << to_string(kind);
  }
}

TEST(DeviceCmmh, GpfFlushWithNothingDirty) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  dev.access_read(PageId{1}, 0, 0);
  const FlushReport r = dev.gpf_flush(1'000'000, FlushBudget::unlimited());
  EXPECT_EQ(r.dirty_pages_flushed, 0u);
  EXPECT_EQ(r.bytes, 0u);
  EXPECT_EQ(r.flush_time, 0u);
  EXPECT_TRUE(r.complete);
}

TEST(DeviceCmmh, GpfFlushUnlimitedCleansEverything) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  for (std::uint64_t p = 0; p < 100; ++p) dev.access_write(PageId{p}, 0, p * 100'000);
  ASSERT_EQ(dev.cache().dirty_pages(), 100u);
  const FlushReport r = dev.gpf_flush(20'000'000, FlushBudget::unlimited());
  EXPECT_EQ(r.dirty_pages_flushed, 100u);
  EXPECT_EQ(r.bytes, 100u * kPageBytes);
  EXPECT_TRUE(r.complete);
  EXPECT_GT(r.flush_time, 0u);
  EXPECT_EQ(dev.cache().dirty_pages(), 0u);
}

TEST(DeviceCmmh, GpfFlushStopsAtBudget) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  for (std::uint64_t p = 0; p < 100; ++p) dev.access_write(PageId{p}, 0, p * 100'000);
  std::vector<PageId> flushed;
  const FlushReport r = dev.gpf_flush(20'000'000, FlushBudget::bytes(50 * kPageBytes),
                                      [&](PageId p) { flushed.push_back(p); });
  EXPECT_FALSE(r.complete);
  EXPECT_EQ(r.dirty_pages_flushed, 50u);
  EXPECT_EQ(flushed.size(), 50u);
  EXPECT_EQ(dev.cache().dirty_pages(), 50u);
  // Set-major order: set indices of flushed pages never decrease.
  for (std::size_t i = 1; i < flushed.size(); ++i)
    EXPECT_LE(dev.cache().set_of(flushed[i - 1]), dev.cache().set_of(flushed[i]));
}

TEST(DeviceCmmh, HitRateNeedsALookup) {
  CmmhDevice dev(cfg_with_cache(1 * MiB));
  EXPECT_THROW(dev.hit_rate(), StatisticError);
  dev.access_read(PageId{0}, 0, 0);
  EXPECT_DOUBLE_EQ(dev.hit_rate(), 0.0);
}

TEST(DeviceCmmh, FootprintHalfTheCacheHitsAfterWarmUp) {
  DeviceCacheState c(64 * MiB, 8);
  const std::uint64_t pages = 32 * MiB / kPageBytes;
  for (std::uint64_t p = 0; p < pages; ++p) c.touch(PageId{p});
  c.reset_counters();
  const Trace t = gen_irregular(32 * MiB, 200'000, 1);
  for (const auto& e : t.entries) c.touch(PageId::of_addr(e.addr));
  EXPECT_GE(c.hit_rate(), 0.999);
}

TEST(DeviceCmmh, FootprintTwiceTheCacheHitsAboutHalf) {
  const std::uint64_t cache = 4 * MiB, footprint = 8 * MiB;
  DeviceCacheState c(cache, 8);
  // Fully-associative reference: one set holding every block.
  ReferenceCache full(1, static_cast<std::uint32_t>(cache / kPageBytes));
  const Trace warmup = gen_irregular(footprint, 100'000, 2);
  for (const auto& e : warmup.entries) {
    c.touch(PageId::of_addr(e.addr));
    full.access(e.addr / kPageBytes, false);
  }
  c.reset_counters();
  std::uint64_t full_hits = 0;
  const Trace t = gen_irregular(footprint, 100'000, 3);
  for (const auto& e : t.entries) {
    c.touch(PageId::of_addr(e.addr));
    full_hits += full.access(e.addr / kPageBytes, false).hit ? 1 : 0;
  }
  EXPECT_NEAR(c.hit_rate(), 0.5, 0.02);
  EXPECT_NEAR(static_cast<double>(full_hits) / 100'000.0, 0.5, 0.02);
}

TEST(DeviceCmmh, FootprintEqualToCacheLosesNothingToConflicts) {
  const std::uint64_t cache = 16 * MiB;
  DeviceCacheState c(cache, 8);
  ReferenceCache full(1, static_cast<std::uint32_t>(cache / kPageBytes));
  for (std::uint64_t p = 0; p < cache / kPageBytes; ++p) {
    c.touch(PageId{p});
    full.access(p, false);
  }
  c.reset_counters();
  std::uint64_t full_hits = 0;
  const Trace t = gen_irregular(cache, 200'000, 4);
  for (const auto& e : t.entries) {
    c.touch(PageId::of_addr(e.addr));
    full_hits += full.access(e.addr / kPageBytes, false).hit ? 1 : 0;
  }
  EXPECT_GE(c.hit_rate(), static_cast<double>(full_hits) / 200'000.0 - 0.001);
  EXPECT_DOUBLE_EQ(c.hit_rate(), 1.0);
}

TEST(DeviceCmmhProperty, MatchesBruteForceReferenceAndKeepsInvariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DeviceCacheState c(64 * 8 * kPageBytes, 8);  // 64 sets
    ReferenceCache ref(c.num_sets(), 8);
    Rng rng(seed);
    for (int i = 0; i < 20'000; ++i) {
      const std::uint64_t page = rng.below(64 * 8 * 3);
      const bool write = rng.below(3) == 0;
      const TouchResult t = c.touch(PageId{page});
      if (write) c.block(PageId{page}, t.way).dirty = true;
      const auto want = ref.access(page, write);
      ASSERT_EQ(t.hit, want.hit) << "seed " << seed << " access " << i;
      ASSERT_EQ(t.evicted.has_value(), want.evicted.has_value());
      if (t.evicted) {
        ASSERT_EQ(t.evicted->page.value, *want.evicted);
        ASSERT_EQ(t.evicted->dirty, want.evicted_dirty);
      }
      ASSERT_EQ(c.block(PageId{page}, t.way).recency, 0);
      if (i % 997 == 0) expect_well_formed(c);
    }
    expect_well_formed(c);
  }
}

TEST(DeviceCmmhProperty, FlashTrafficIsConserved) {
  Rng rng(9);
  CmmhDevice dev(cfg_with_cache(256 * kPageBytes));
  SimTime now = 0;
  for (int i = 0; i < 20'000; ++i) {
    const auto kind = static_cast<AccessKind>(rng.below(4));
    const std::uint64_t addr = rng.below(1024) * kPageBytes + rng.below(64) * kLineBytes;
    now = std::max(now + 10, dev.access({0, kind, addr, kLineBytes, now}, now) - 5000);
  }
  EXPECT_EQ(dev.flash().reads(), dev.cache().counters().misses);
  EXPECT_EQ(dev.flash().writes(), dev.cache().counters().evictions_dirty);
  const std::uint64_t dirty = dev.cache().dirty_pages();
  const auto r = dev.gpf_flush(now, FlushBudget::unlimited());
  EXPECT_EQ(r.dirty_pages_flushed, dirty);
  EXPECT_EQ(dev.flash().writes(), dev.cache().counters().evictions_dirty + dirty);
  EXPECT_EQ(dev.cache().dirty_pages(), 0u);
}

TEST(DeviceCmmh, LatencyModelValidation) {
  LatencyModel lm;
  lm.t_ctrl = -1;
  EXPECT_THROW(lm.validate(), ConfigError);
  LatencyModel z;
  z.ii_read = 0.2;
  EXPECT_THROW(z.validate(), ConfigError);
  LatencyModel d;
  EXPECT_EQ(d.read_hit(), 729u);
  EXPECT_EQ(d.miss_prefix() + d.miss_suffix(), d.read_hit());
}
