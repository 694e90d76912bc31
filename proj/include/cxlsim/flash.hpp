#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "cxlsim/random.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim {

/// NAND backend parameters. Defaults sit inside the "tens of microseconds"
/// range reported for the device's NVMe flash; they are calibration knobs.
struct FlashConfig {
  SimTime read_service = 25'000;
  SimTime write_service = 40'000;
  std::uint32_t channels = 4;
  std::uint32_t queue_capacity = 256;
  /// Fractional +/- jitter applied to each service time (0 disables).
  double jitter = 0.0;
  std::uint64_t jitter_seed = 1;
  /// Keep a full FlashOp log (tests and event inspection only).
  bool record_ops = false;

  void validate() const {
    if (channels < 1) throw ConfigError("flash.channels must be >= 1");
    if (read_service == 0 || write_service == 0) throw ConfigError("flash service times must be > 0");
    if (queue_capacity < 1) throw ConfigError("flash.queue_capacity must be >= 1");
    if (jitter < 0.0 || jitter >= 1.0) throw ConfigError("flash.jitter must be in [0, 1)");
  }
};

enum class FlashOpKind : std::uint8_t { ReadPage, WritePage };

struct FlashOp {
  FlashOpKind kind = FlashOpKind::ReadPage;
  PageId page;
  SimTime enqueue_time = 0;
  SimTime start_time = 0;
  SimTime complete_time = 0;
  std::uint32_t channel = 0;
};

/// Page-granular flash service model: FCFS dispatch onto the first free of
/// `channels` servers, with a bounded wait queue. When the queue is full the
/// submitter stalls until the oldest waiting op enters service.
class FlashBackend {
 public:
  explicit FlashBackend(FlashConfig cfg = {})
      : cfg_(cfg), channel_free_(cfg.channels, 0), busy_(cfg.channels), rng_(cfg.jitter_seed) {
    cfg_.validate();
  }

  const FlashConfig& config() const { return cfg_; }

  /// Enqueue one page operation at `now`; returns the full op record.
  FlashOp submit(FlashOpKind kind, PageId page, SimTime now) {
    // Enqueue order is dispatch order; late callers are clamped forward.
    now = std::max(now, last_enqueue_);
    while (!waiting_starts_.empty() && waiting_starts_.front() <= now) waiting_starts_.pop_front();
    SimTime enqueue = now;
    if (waiting_starts_.size() >= cfg_.queue_capacity) {
      enqueue = waiting_starts_[waiting_starts_.size() - cfg_.queue_capacity];
      ++stalls_;
      while (!waiting_starts_.empty() && waiting_starts_.front() <= enqueue) waiting_starts_.pop_front();
    }
    last_enqueue_ = enqueue;

    auto it = std::min_element(channel_free_.begin(), channel_free_.end());
    const auto channel = static_cast<std::uint32_t>(it - channel_free_.begin());
    const SimTime start = std::max(enqueue, *it);
    const SimTime done = start + service_time(kind);
    *it = done;
    busy_[channel].emplace_back(start, done);
    if (start > enqueue) waiting_starts_.push_back(start);

    FlashOp op{kind, page, enqueue, start, done, channel};
    if (kind == FlashOpKind::ReadPage) ++reads_; else ++writes_;
    if (cfg_.record_ops) log_.push_back(op);
    return op;
  }

  /// Busy channel-time over [from, to) divided by channels x window.
  double utilization(SimTime from, SimTime to) const {
    if (to <= from) return 0.0;
    long double busy = 0;
    for (const auto& intervals : busy_) {
      for (const auto& [s, e] : intervals) {
        const SimTime lo = std::max(s, from);
        const SimTime hi = std::min(e, to);
        if (hi > lo) busy += static_cast<long double>(hi - lo);
      }
    }
    return static_cast<double>(busy / (static_cast<long double>(cfg_.channels) * (to - from)));
  }

  double utilization(SimTime window) const { return utilization(0, window); }

  std::uint64_t reads() const { return reads_; }
  std::uint64_t writes() const { return writes_; }
  std::uint64_t stalls() const { return stalls_; }
  const std::vector<FlashOp>& log() const { return log_; }

  /// Time at which every submitted op has completed.
  SimTime drain_time() const { return *std::max_element(channel_free_.begin(), channel_free_.end()); }

  /// Ops waiting (not yet in service) as of `now`.
  std::size_t queued_at(SimTime now) const {
    return static_cast<std::size_t>(std::count_if(waiting_starts_.begin(), waiting_starts_.end(),
                                                  [now](SimTime s) { return s > now; }));
  }

 private:
  SimTime service_time(FlashOpKind kind) {
    const SimTime base = kind == FlashOpKind::ReadPage ? cfg_.read_service : cfg_.write_service;
    if (cfg_.jitter <= 0.0) return base;
    const double scale = 1.0 + cfg_.jitter * (2.0 * rng_.unit() - 1.0);
    return std::max<SimTime>(1, static_cast<SimTime>(std::llround(static_cast<double>(base) * scale)));
  }

  FlashConfig cfg_;
  std::vector<SimTime> channel_free_;
  std::vector<std::vector<std::pair<SimTime, SimTime>>> busy_;
  std::deque<SimTime> waiting_starts_;
  SimTime last_enqueue_ = 0;
  std::uint64_t reads_ = 0;
  std::uint64_t writes_ = 0;
  std::uint64_t stalls_ = 0;
  std::vector<FlashOp> log_;
  Rng rng_;
};

}  // namespace cxlsim
