#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cxlsim/types.hpp"

namespace cxlsim {

/// Flat-latency DRAM node. Remote-socket coherence cost is folded into the
/// constants; there is no cache state.
struct FlatDramConfig {
  std::uint64_t capacity_bytes = 256 * GiB;
  SimTime read_latency = 123;   // serialized load (pointer chase)
  SimTime write_txn = 323;      // extra transaction of a temporal store
  SimTime posted_ack = 126;     // non-temporal store acknowledgement
  SimTime ii = 7;               // per-port initiation interval
  std::uint32_t ports = 24;     // 24 x 64 B / 7 ns ~= 219 GB/s

  void validate() const {
    if (capacity_bytes == 0 || capacity_bytes % kPageBytes != 0)
      throw ConfigError("flat node capacity must be a positive multiple of 4096");
    if (ii == 0) throw ConfigError("flat node ii must be >= 1");
    if (ports == 0) throw ConfigError("flat node ports must be >= 1");
  }

  static FlatDramConfig ddr5_local() { return {}; }

  static FlatDramConfig ddr5_remote() {
    FlatDramConfig c;
    c.read_latency = 216;
    c.write_txn = 601;
    c.posted_ack = 259;
    return c;
  }
};

class FlatDram {
 public:
  explicit FlatDram(FlatDramConfig cfg = {}) : cfg_((cfg.validate(), cfg)), port_free_(cfg.ports, 0) {}

  const FlatDramConfig& config() const { return cfg_; }
  std::uint64_t capacity_bytes() const { return cfg_.capacity_bytes; }

  SimTime access(const AccessRequest& req, SimTime now) {
    if (req.size != kLineBytes) throw ConfigError("access size must be 64 bytes");
    if (req.addr >= cfg_.capacity_bytes) throw ConfigError("address beyond node capacity");
    const SimTime admit = admit_at(now);
    switch (req.kind) {
      case AccessKind::TemporalLoad:
      case AccessKind::NonTemporalLoad: return admit + cfg_.read_latency;
      case AccessKind::TemporalStore: return admit + cfg_.read_latency + cfg_.write_txn;
      case AccessKind::NonTemporalStore: return admit + cfg_.posted_ack;
    }
    return admit;
  }

 private:
  SimTime admit_at(SimTime now) {
    auto it = std::min_element(port_free_.begin(), port_free_.end());
    const SimTime admit = std::max(now, *it);
    *it = admit + cfg_.ii;
    return admit;
  }

  FlatDramConfig cfg_;
  std::vector<SimTime> port_free_;
};

}  // namespace cxlsim
