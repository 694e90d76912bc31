#pragma once

#include <map>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cxlsim/cmmh.hpp"
#include "cxlsim/flat_dram.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim {

enum class NodeKind : std::uint8_t { FlatDram, CmmH };

struct MemNode {
  std::uint32_t node_id = 0;
  std::string name;
  std::variant<FlatDram, CmmhDevice> model;

  NodeKind kind() const { return std::holds_alternative<FlatDram>(model) ? NodeKind::FlatDram : NodeKind::CmmH; }

  std::uint64_t capacity_bytes() const {
    return std::visit([](const auto& m) { return m.capacity_bytes(); }, model);
  }

  SimTime access(const AccessRequest& req, SimTime now) {
    return std::visit([&](auto& m) { return m.access(req, now); }, model);
  }
};

/// Page placement policy. Interleave granularity is one 4 KB page.
class AllocPolicy {
 public:
  static AllocPolicy single_node(std::uint32_t node) { return AllocPolicy({{node, 1}}); }

  /// (node, weight) pairs; pages are dealt round-robin in this order.
  static AllocPolicy weighted_interleave(std::vector<std::pair<std::uint32_t, std::uint32_t>> weights) {
    if (weights.empty()) throw ConfigError("weighted interleave needs at least one node");
    for (const auto& [node, w] : weights)
      if (w == 0) throw ConfigError("interleave weights must be positive integers");
    return AllocPolicy(std::move(weights));
  }

  bool is_single_node() const { return weights_.size() == 1; }
  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& weights() const { return weights_; }
  std::uint64_t period() const {
    return std::accumulate(weights_.begin(), weights_.end(), std::uint64_t{0},
                           [](std::uint64_t a, const auto& p) { return a + p.second; });
  }

 private:
  explicit AllocPolicy(std::vector<std::pair<std::uint32_t, std::uint32_t>> w) : weights_(std::move(w)) {}
  std::vector<std::pair<std::uint32_t, std::uint32_t>> weights_;
};

struct Placement {
  std::uint32_t node_id = 0;
  PageId physical;
  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Pure placement function: virtual page -> (node, physical page).
inline Placement place_page(PageId vpage, const AllocPolicy& policy) {
  const std::uint64_t period = policy.period();
  const std::uint64_t lap = vpage.value / period;
  std::uint64_t pos = vpage.value % period;
  for (const auto& [node, w] : policy.weights()) {
    if (pos < w) return Placement{node, PageId{lap * w + pos}};
    pos -= w;
  }
  return {};  // unreachable: pos < period
}

/// NUMA-style memory system: flat DRAM nodes plus CMM-H node(s).
class MemTopology {
 public:
  MemTopology() = default;

  std::uint32_t add_flat(std::string name, FlatDramConfig cfg) {
    nodes_.push_back(MemNode{static_cast<std::uint32_t>(nodes_.size()), std::move(name), FlatDram(cfg)});
    return nodes_.back().node_id;
  }

  std::uint32_t add_cmmh(std::string name, CmmhConfig cfg) {
    nodes_.push_back(MemNode{static_cast<std::uint32_t>(nodes_.size()), std::move(name), CmmhDevice(cfg)});
    return nodes_.back().node_id;
  }

  /// DDR5-L (node 0), DDR5-R (node 1), CMM-H (node 2).
  static MemTopology standard(CmmhConfig cmmh = {}) {
    MemTopology t;
    t.add_flat("DDR5-L", FlatDramConfig::ddr5_local());
    t.add_flat("DDR5-R", FlatDramConfig::ddr5_remote());
    t.add_cmmh("CMM-H", std::move(cmmh));
    return t;
  }

  std::size_t size() const { return nodes_.size(); }
  MemNode& node(std::uint32_t id) { return nodes_.at(id); }
  const MemNode& node(std::uint32_t id) const { return nodes_.at(id); }

  std::uint32_t node_id(const std::string& name) const {
    for (const auto& n : nodes_)
      if (n.name == name) return n.node_id;
    throw ConfigError("unknown memory node: " + name);
  }

  void set_policy(AllocPolicy p) {
    for (const auto& [node, w] : p.weights())
      if (node >= nodes_.size()) throw ConfigError("policy references unknown node");
    policy_ = std::move(p);
  }
  const AllocPolicy& policy() const { return policy_; }

  Placement allocate(PageId vpage) const { return allocate(vpage, policy_); }

  Placement allocate(PageId vpage, const AllocPolicy& policy) const {
    const Placement pl = place_page(vpage, policy);
    if (pl.physical.base_addr() >= nodes_.at(pl.node_id).capacity_bytes())
      throw AllocationError("node " + nodes_.at(pl.node_id).name + " capacity exhausted");
    return pl;
  }

  /// Route a virtual-address access to its owning node under the current policy.
  SimTime access(const AccessRequest& req, SimTime now) { return route_access(req, policy_, now); }

  SimTime route_access(const AccessRequest& req, const AllocPolicy& policy, SimTime now) {
    const Placement pl = allocate(PageId::of_addr(req.addr), policy);
    AccessRequest phys = req;
    phys.addr = pl.physical.base_addr() + req.addr % kPageBytes;
    ++routed_[pl.node_id];
    return nodes_[pl.node_id].access(phys, now);
  }

  std::uint64_t routed_to(std::uint32_t node) const {
    auto it = routed_.find(node);
    return it == routed_.end() ? 0 : it->second;
  }

 private:
  std::vector<MemNode> nodes_;
  AllocPolicy policy_ = AllocPolicy::single_node(0);
  std::map<std::uint32_t, std::uint64_t> routed_;
};

}  // namespace cxlsim
