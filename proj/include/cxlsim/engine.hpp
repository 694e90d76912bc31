#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "cxlsim/types.hpp"

namespace cxlsim {

template <class D>
concept MemoryDevice = requires(D d, const AccessRequest& r, SimTime t) {
  { d.access(r, t) } -> std::same_as<SimTime>;
};

struct HostConfig {
  /// Max outstanding requests per thread (line-fill-buffer analog).
  std::uint32_t mlp_window = 16;
  /// Minimum spacing between successive issues from one thread.
  SimTime issue_interval = 6;
  /// Fences wait for posted non-temporal stores to be acknowledged.
  bool fence_drain = true;

  void validate() const {
    if (mlp_window < 1) throw ConfigError("host.mlp_window must be >= 1");
  }
};

/// Timing of one fenced batch of accesses.
struct BatchResult {
  SimTime start = 0;
  SimTime end = 0;
  std::vector<SimTime> per_request_completions;

  SimTime total() const { return end - start; }
  std::size_t count() const { return per_request_completions.size(); }
  /// (end - start) / N. Exact whenever N is a power of two.
  double amortized_latency() const {
    return count() == 0 ? 0.0 : static_cast<double>(total()) / static_cast<double>(count());
  }
};

struct EngineEvent {
  SimTime issue = 0;
  SimTime completion = 0;
  std::uint64_t addr = 0;
  std::uint32_t thread_id = 0;
  AccessKind kind = AccessKind::TemporalLoad;
};

/// Single-threaded deterministic event loop driving one memory device.
/// Device calls are made in non-decreasing simulated time, ties broken by
/// thread id, so identical inputs give identical event sequences.
template <MemoryDevice Device>
class Engine {
 public:
  Engine(Device& device, HostConfig host = {}) : device_(device), host_((host.validate(), host)) {}

  SimTime now() const { return now_; }
  const HostConfig& host() const { return host_; }
  Device& device() { return device_; }

  /// Let simulated time pass with no device activity (host-side work).
  void advance(SimTime dt) { now_ += dt; }

  void begin_power_failure() { power_failed_ = true; }
  void end_power_failure() { power_failed_ = false; }
  bool power_failed() const { return power_failed_; }

  /// Issue one access at max(req.issue_time, now()).
  SimTime issue_access(const AccessRequest& req) {
    const SimTime at = std::max(req.issue_time, now_);
    return dispatch(req, at);
  }

  /// Completion time of everything the thread has issued so far.
  SimTime fence(std::uint32_t thread_id) {
    ThreadState& ts = thread(thread_id);
    const SimTime t = std::max(now_, ts.last_completion);
    ts.recent.clear();
    now_ = t;
    return t;
  }

  /// Issue `reqs` in order as one stream with at most `window` in flight,
  /// then fence.
  BatchResult run_batch(std::span<const AccessRequest> reqs, std::uint32_t window) {
    std::vector<std::vector<AccessRequest>> one{std::vector<AccessRequest>(reqs.begin(), reqs.end())};
    return std::move(run_streams(one, window).front());
  }

  /// One stream per host thread, interleaved by simulated time. Each stream
  /// ends with a fence; results are per stream.
  std::vector<BatchResult> run_streams(const std::vector<std::vector<AccessRequest>>& streams,
                                       std::uint32_t window) {
    if (window < 1) throw ConfigError("window must be >= 1");
    const SimTime start = now_;
    struct Cursor {
      std::size_t next = 0;
      SimTime last_issue = 0;
      bool issued_any = false;
      std::priority_queue<SimTime, std::vector<SimTime>, std::greater<>> in_flight;
    };
    std::vector<Cursor> cur(streams.size());
    std::vector<BatchResult> out(streams.size());
    using Item = std::pair<SimTime, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;

    auto candidate = [&](std::size_t s) {
      Cursor& c = cur[s];
      SimTime t = c.issued_any ? std::max(start, c.last_issue + host_.issue_interval) : start;
      while (c.in_flight.size() >= window) {
        t = std::max(t, c.in_flight.top());
        c.in_flight.pop();
      }
      return t;
    };

    for (std::size_t s = 0; s < streams.size(); ++s) {
      out[s].start = start;
      out[s].end = start;
      out[s].per_request_completions.reserve(streams[s].size());
      if (power_failed_ && !streams[s].empty())
        throw CrashSemanticsError("access issued during a power-failure window");
      if (!streams[s].empty()) ready.emplace(candidate(s), s);
    }
    while (!ready.empty()) {
      const auto [t, s] = ready.top();
      ready.pop();
      Cursor& c = cur[s];
      AccessRequest req = streams[s][c.next++];
      req.issue_time = t;
      const SimTime done = dispatch(req, t);
      c.last_issue = t;
      c.issued_any = true;
      c.in_flight.push(done);
      out[s].per_request_completions.push_back(done);
      out[s].end = std::max(out[s].end, done);
      if (c.next < streams[s].size()) ready.emplace(candidate(s), s);
    }
    SimTime end = start;
    std::vector<std::uint32_t> ids;
    for (std::size_t s = 0; s < streams.size(); ++s) {
      for (const auto& r : streams[s]) ids.push_back(r.thread_id);
      end = std::max(end, out[s].end);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (auto id : ids) fence(id);
    now_ = std::max(now_, end);
    return out;
  }

  void set_recording(bool on) { recording_ = on; }
  const std::vector<EngineEvent>& events() const { return events_; }
  /// FNV-1a over every dispatched (issue, completion, addr, thread, kind).
  std::uint64_t event_hash() const { return hash_; }
  std::uint64_t dispatched() const { return dispatched_; }

 private:
  struct ThreadState {
    SimTime last_completion = 0;
    std::unordered_map<std::uint64_t, SimTime> recent;  // line -> completion
  };

  ThreadState& thread(std::uint32_t id) {
    if (id >= threads_.size()) threads_.resize(id + 1);
    return threads_[id];
  }

  SimTime dispatch(const AccessRequest& req, SimTime at) {
    if (power_failed_) throw CrashSemanticsError("access issued during a power-failure window");
    now_ = std::max(now_, at);
    SimTime done = device_.access(req, at);
    ThreadState& ts = thread(req.thread_id);
    // Same-line accesses of one thread complete in program order.
    auto [it, fresh] = ts.recent.try_emplace(line_of(req.addr), done);
    if (!fresh) {
      done = std::max(done, it->second);
      it->second = done;
    }
    if (ts.recent.size() > kRecentLimit) prune(ts);
    if (host_.fence_drain || is_load(req.kind) || req.kind == AccessKind::TemporalStore)
      ts.last_completion = std::max(ts.last_completion, done);
    mix(at);
    mix(done);
    mix(req.addr);
    mix((static_cast<std::uint64_t>(req.thread_id) << 8) | static_cast<std::uint64_t>(req.kind));
    ++dispatched_;
    if (recording_) events_.push_back({at, done, req.addr, req.thread_id, req.kind});
    return done;
  }

  void prune(ThreadState& ts) {
    std::erase_if(ts.recent, [this](const auto& kv) { return kv.second <= now_; });
  }

  void mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xff;
      hash_ *= 0x100000001b3ULL;
    }
  }

  static constexpr std::size_t kRecentLimit = 1 << 14;

  Device& device_;
  HostConfig host_;
  SimTime now_ = 0;
  bool power_failed_ = false;
  bool recording_ = false;
  std::vector<ThreadState> threads_;
  std::vector<EngineEvent> events_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  std::uint64_t dispatched_ = 0;
};

}  // namespace cxlsim
