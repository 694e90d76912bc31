#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cxlsim/types.hpp"

namespace cxlsim {

/// Nearest-rank order statistic: the smallest sample with at least
/// num/den of the data at or below it. Integer arithmetic, no interpolation.
inline std::uint64_t nearest_rank(std::span<const std::uint64_t> sorted, std::uint64_t num, std::uint64_t den) {
  if (sorted.empty()) throw StatisticError("percentile of an empty sample set");
  const auto n = static_cast<unsigned __int128>(sorted.size());
  auto rank = static_cast<std::uint64_t>((n * num + den - 1) / den);
  rank = std::clamp<std::uint64_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

struct StatsSummary {
  std::uint64_t count = 0;
  double mean = 0;
  std::uint64_t median = 0;
  std::uint64_t p9999 = 0;
  std::uint64_t p99999 = 0;
  std::uint64_t max = 0;

  /// p99.99 needs 2x10^4 samples and p99.999 needs 2x10^5 to rest on more
  /// than one observation beyond the quantile.
  static constexpr std::uint64_t kMinP9999 = 20'000;
  static constexpr std::uint64_t kMinP99999 = 200'000;

  bool p9999_supported() const { return count >= kMinP9999; }
  bool p99999_supported() const { return count >= kMinP99999; }

  friend bool operator==(const StatsSummary&, const StatsSummary&) = default;
};

/// Order statistics are always computed; whether a report may show them is
/// decided by the *_supported() predicates.
inline StatsSummary summarize(std::vector<std::uint64_t> samples) {
  if (samples.empty()) throw StatisticError("summarize needs at least one sample");
  std::sort(samples.begin(), samples.end());
  StatsSummary s;
  s.count = samples.size();
  long double sum = 0;
  for (auto v : samples) sum += static_cast<long double>(v);
  s.mean = static_cast<double>(sum / static_cast<long double>(samples.size()));
  s.median = nearest_rank(samples, 1, 2);
  s.p9999 = nearest_rank(samples, 9999, 10000);
  s.p99999 = nearest_rank(samples, 99999, 100000);
  s.max = samples.back();
  return s;
}

/// Aggregate bandwidth per (kind, thread count) in GB/s (10^9 bytes/s).
struct BandwidthPoint {
  std::string kind;
  std::uint32_t threads = 0;
  std::uint64_t bytes = 0;
  SimTime elapsed = 0;

  double gbps() const { return elapsed == 0 ? 0.0 : static_cast<double>(bytes) / static_cast<double>(elapsed); }
};

struct BandwidthReport {
  std::vector<BandwidthPoint> points;

  double max_gbps(const std::string& kind) const {
    double m = 0;
    for (const auto& p : points)
      if (p.kind == kind) m = std::max(m, p.gbps());
    return m;
  }
};

}  // namespace cxlsim
