#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cxlsim {

/// Simulated time in integer nanoseconds. Zero is the start of a simulation.
using SimTime = std::uint64_t;

inline constexpr std::uint32_t kLineBytes = 64;
inline constexpr std::uint32_t kPageBytes = 4096;
inline constexpr std::uint32_t kLinesPerPage = kPageBytes / kLineBytes;

inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;
inline constexpr std::uint64_t GiB = 1024 * MiB;
inline constexpr std::uint64_t TiB = 1024 * GiB;

enum class AccessKind : std::uint8_t {
  TemporalLoad,
  NonTemporalLoad,
  TemporalStore,
  NonTemporalStore,
};

inline constexpr bool is_load(AccessKind k) {
  return k == AccessKind::TemporalLoad || k == AccessKind::NonTemporalLoad;
}

inline constexpr bool is_store(AccessKind k) { return !is_load(k); }

inline constexpr std::string_view to_string(AccessKind k) {
  switch (k) {
    case AccessKind::TemporalLoad: return "ld";
    case AccessKind::NonTemporalLoad: return "nt-ld";
    case AccessKind::TemporalStore: return "st";
    case AccessKind::NonTemporalStore: return "nt-st";
  }
  return "?";
}

/// One 64 B host memory operation.
struct AccessRequest {
  std::uint32_t thread_id = 0;
  AccessKind kind = AccessKind::TemporalLoad;
  std::uint64_t addr = 0;
  std::uint32_t size = kLineBytes;
  SimTime issue_time = 0;
};

/// Device page number (4 KB granularity).
struct PageId {
  std::uint64_t value = 0;

  static constexpr PageId of_addr(std::uint64_t addr) { return PageId{addr / kPageBytes}; }
  constexpr std::uint64_t base_addr() const { return value * kPageBytes; }
  friend constexpr bool operator==(PageId, PageId) = default;
  friend constexpr auto operator<=>(PageId, PageId) = default;
};

inline constexpr std::uint64_t line_of(std::uint64_t addr) { return addr / kLineBytes; }
inline constexpr std::uint64_t line_base(std::uint64_t addr) { return addr & ~std::uint64_t{kLineBytes - 1}; }

// Error taxonomy. Each maps onto one failure class the CLI reports distinctly.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CrashSemanticsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StatisticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AllocationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnrecoverableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cxlsim
