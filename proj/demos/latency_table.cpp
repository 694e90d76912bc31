// Prints serialized and 16-wide amortized load latency for the standard
// three-node topology, using the library directly.
#include <cstdio>
#include <vector>

#include "cxlsim/cxlsim.hpp"

using namespace cxlsim;

int main() {
  CmmhConfig cmmh;
  cmmh.cache_capacity_bytes = 256 * MiB;
  MemTopology topo = MemTopology::standard(cmmh);
  const std::uint64_t region = 64 * MiB;

  std::printf("%-8s %10s %10s\n", "node", "serial_ns", "ld16_ns");
  for (std::uint32_t id = 0; id < topo.size(); ++id) {
    MemNode& node = topo.node(id);
    Engine<MemNode> eng(node);
    for (std::uint64_t a = 0; a < region; a += kPageBytes) {
      eng.issue_access({0, AccessKind::TemporalLoad, a, kLineBytes, 0});
      eng.fence(0);
    }

    std::vector<std::uint64_t> hops;
    for (const auto& e : gen_pointer_chase(region, 10'000, 1).entries) {
      const SimTime t0 = eng.now();
      eng.issue_access(e.request());
      hops.push_back(eng.fence(0) - t0);
    }
    std::vector<std::uint64_t> batches;
    for (std::uint64_t b = 0; b < 10'000; ++b)
      batches.push_back(eng.run_batch(gen_parallel_random(16, region, AccessKind::TemporalLoad, b).requests(), 16).total());

    std::printf("%-8s %10llu %10.2f\n", node.name.c_str(), static_cast<unsigned long long>(summarize(hops).median),
                static_cast<double>(summarize(batches).median) / 16.0);
  }
}
