#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cxlsim/cmmh.hpp"
#include "cxlsim/config.hpp"
#include "cxlsim/engine.hpp"
#include "cxlsim/persistence.hpp"
#include "cxlsim/random.hpp"
#include "cxlsim/report.hpp"
#include "cxlsim/stats.hpp"
#include "cxlsim/topology.hpp"
#include "cxlsim/workloads.hpp"

namespace cxlsim {

inline MemTopology build_topology(const ExperimentConfig& cfg) {
  MemTopology t;
  for (const auto& n : cfg.nodes) {
    if (n.kind == NodeKind::CmmH) t.add_cmmh(n.name, cfg.device);
    else t.add_flat(n.name, n.flat);
  }
  return t;
}

/// "single:<node>" or "interleave:<node>=<w>,<node>=<w>".
inline AllocPolicy parse_policy(const std::string& spec, const MemTopology& topo) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("policy must be single:<node> or interleave:<node>=<w>,...");
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (kind == "single") return AllocPolicy::single_node(topo.node_id(detail::trim(rest)));
  if (kind != "interleave") throw ConfigError("unknown policy kind '" + kind + "'");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> w;
  for (const auto& part : split_list(rest)) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("interleave entry must be <node>=<weight>");
    const auto weight = parse_uint_value(detail::trim(part.substr(eq + 1)));
    if (weight > 0xffffffffULL) throw ConfigError("interleave weight too large");
    w.emplace_back(topo.node_id(detail::trim(part.substr(0, eq))), static_cast<std::uint32_t>(weight));
  }
  return AllocPolicy::weighted_interleave(std::move(w));
}

inline AccessKind parse_access_kind(const std::string& s) {
  for (auto k : {AccessKind::TemporalLoad, AccessKind::NonTemporalLoad, AccessKind::TemporalStore,
                 AccessKind::NonTemporalStore})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown access kind '" + s + "'");
}

namespace detail {

/// Touch every page of [base, base + bytes) once, 16 pages per fenced batch.
template <class Dev>
void warm_pages(Engine<Dev>& eng, std::uint64_t base, std::uint64_t bytes) {
  std::vector<AccessRequest> batch;
  for (std::uint64_t a = base; a < base + bytes; a += kPageBytes) {
    batch.push_back({0, AccessKind::TemporalLoad, a, kLineBytes, 0});
    if (batch.size() == 16) {
      eng.run_batch(batch, 16);
      batch.clear();
    }
  }
  if (!batch.empty()) eng.run_batch(batch, 16);
}

inline void reset_node_stats(MemNode& n) {
  if (auto* d = std::get_if<CmmhDevice>(&n.model)) d->reset_stats();
}

inline Json hit_rate_of(const MemNode& n) {
  if (const auto* d = std::get_if<CmmhDevice>(&n.model))
    if (d->cache().counters().lookups() > 0) return d->hit_rate();
  return nullptr;
}

inline Report new_report(const ExperimentConfig& cfg, std::vector<std::string> columns) {
  Report r;
  r.kind = cfg.kind;
  r.name = cfg.name;
  r.seed = cfg.seed;
  r.config = cfg.echo;
  r.columns = std::move(columns);
  r.timestamp = utc_timestamp();
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Calibration: serialized pointer-chase latency and 16-wide amortized latency
// per access kind, for every node.

inline Report run_calibration(const ExperimentConfig& cfg) {
  const WorkloadConfig& w = cfg.workload;
  std::vector<std::string> cols{"node", "mlc"};
  for (const auto& k : {"ld", "nt-ld", "st", "nt-st"}) cols.emplace_back(k);
  Report rep = cxlsim::detail::new_report(cfg, cols);
  const Trace chase = gen_pointer_chase(w.chase_region, w.chase_hops, derive_seed(cfg.seed, 1));

  for (std::size_t ni = 0; ni < cfg.nodes.size(); ++ni) {
    MemTopology topo = build_topology(cfg);
    MemNode& node = topo.node(static_cast<std::uint32_t>(ni));
    Engine<MemNode> eng(node, cfg.host);
    const std::uint64_t region = std::max(w.chase_region, w.region_size);
    if (node.kind() == NodeKind::CmmH) detail::warm_pages(eng, 0, region);

    std::vector<std::uint64_t> hops;
    hops.reserve(chase.size());
    for (const auto& e : chase.entries) {
      const SimTime t0 = eng.now();
      eng.issue_access(e.request());
      hops.push_back(eng.fence(0) - t0);
    }
    std::vector<Json> row{node.name, summarize(hops).median};

    for (const auto& kname : {"ld", "nt-ld", "st", "nt-st"}) {
      const AccessKind kind = parse_access_kind(kname);
      std::vector<std::uint64_t> totals;
      totals.reserve(w.batches);
      for (std::uint64_t b = 0; b < w.batches; ++b) {
        const std::uint64_t stream = derive_seed(cfg.seed, 100 + ni * 4 + static_cast<std::uint64_t>(kind));
        const Trace t = gen_parallel_random(w.batch_width, w.region_size, kind, derive_seed(stream, b));
        totals.push_back(eng.run_batch(t.requests(), w.batch_width).total());
      }
      row.emplace_back(static_cast<double>(summarize(totals).median) / static_cast<double>(w.batch_width));
    }
    rep.add_row(std::move(row));
  }

  if (!cfg.output.normalize_to.empty()) {
    std::size_t base = rep.rows.size();
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
      if (rep.rows[i][0] == cfg.output.normalize_to) base = i;
    if (base == rep.rows.size()) throw ConfigError("normalize_to names an unknown node: " + cfg.output.normalize_to);
    const std::size_t n = rep.columns.size();
    for (std::size_t c = 1; c < n; ++c) rep.columns.push_back(rep.columns[c] + "_norm");
    for (auto& row : rep.rows)
      for (std::size_t c = 1; c < n; ++c) row.emplace_back(row[c].get<double>() / rep.rows[base][c].get<double>());
  }
  for (const auto& row : rep.rows)
    for (std::size_t c = 1; c < rep.columns.size(); ++c)
      rep.summary[row[0].get<std::string>() + "." + rep.columns[c]] = row[c];
  return rep;
}

// ---------------------------------------------------------------------------
// Bandwidth: private lines per thread, all threads concurrently.

inline Report run_bandwidth(const ExperimentConfig& cfg) {
  const WorkloadConfig& w = cfg.workload;
  Report rep = cxlsim::detail::new_report(cfg, {"kind", "threads", "gbps", "bytes", "elapsed_ns"});
  MemTopology topo = build_topology(cfg);
  MemNode& node = topo.node(topo.node_id(w.node));
  Engine<MemNode> eng(node, cfg.host);
  const std::uint64_t max_threads = *std::max_element(w.threads.begin(), w.threads.end());
  const std::uint64_t per_thread = w.lines_per_thread * kLineBytes;
  detail::warm_pages(eng, 0, max_threads * per_thread);

  Rng rng(derive_seed(cfg.seed, 2));
  for (const auto& kname : w.kinds) {
    const AccessKind kind = parse_access_kind(kname);
    double best = 0;
    for (auto threads : w.threads) {
      std::uint64_t bytes = 0;
      SimTime elapsed = 0;
      for (std::uint64_t r = 0; r < std::max<std::uint64_t>(1, w.repetitions); ++r) {
        std::vector<std::vector<AccessRequest>> streams(threads);
        for (std::uint32_t t = 0; t < threads; ++t) {
          std::vector<std::uint64_t> lines(w.lines_per_thread);
          for (std::uint64_t i = 0; i < lines.size(); ++i) lines[i] = t * per_thread + i * kLineBytes;
          for (std::uint64_t i = lines.size(); i > 1; --i) std::swap(lines[i - 1], lines[rng.below(i)]);
          for (auto a : lines) streams[t].push_back({t, kind, a, kLineBytes, 0});
        }
        const auto res = eng.run_streams(streams, cfg.host.mlp_window);
        SimTime end = res.front().start;
        for (const auto& b : res) end = std::max(end, b.end);
        elapsed += end - res.front().start;
        bytes += threads * per_thread;
      }
      const BandwidthPoint p{kname, static_cast<std::uint32_t>(threads), bytes, elapsed};
      rep.add_row({kname, threads, p.gbps(), bytes, elapsed});
      best = std::max(best, p.gbps());
    }
    rep.summary["max_gbps." + kname] = best;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Tail latency versus region size.

inline std::vector<std::uint64_t> default_sweep_sizes(std::uint64_t cache) {
  return {cache / 4, cache / 2, cache, cache * 2, cache * 4};
}

inline Report run_tail_sweep(const ExperimentConfig& cfg) {
  const WorkloadConfig& w = cfg.workload;
  Report rep = cxlsim::detail::new_report(cfg, {"region_size", "region_ratio", "batches", "mean", "median", "p9999", "p99999",
                                        "max", "hit_rate", "max_batch_flash_reads"});
  const auto sizes = w.region_sizes.empty() ? default_sweep_sizes(cfg.device.cache_capacity_bytes) : w.region_sizes;
  const SweepPlan plan = gen_tail_sweep(sizes, w.batches_per_size, cfg.seed, w.batch_width);
  rep.warnings = plan.warnings;
  for (const auto& pt : plan.points) {
    MemTopology topo = build_topology(cfg);
    MemNode& node = topo.node(topo.node_id(w.node));
    Engine<MemNode> eng(node, cfg.host);
    auto* dev = std::get_if<CmmhDevice>(&node.model);
    detail::warm_pages(eng, 0, pt.region_size);
    detail::reset_node_stats(node);

    std::vector<std::uint64_t> samples;
    samples.reserve(pt.batches);
    std::uint64_t worst = 0, worst_flash = 0;
    for (std::uint64_t b = 0; b < pt.batches; ++b) {
      const Trace t = pt.batch(b);
      const std::uint64_t before = dev ? dev->flash().reads() : 0;
      const SimTime total = eng.run_batch(t.requests(), pt.batch_width).total();
      samples.push_back(total);
      if (total > worst) {
        worst = total;
        worst_flash = (dev ? dev->flash().reads() : 0) - before;
      }
    }
    const StatsSummary s = summarize(samples);
    const double ratio = static_cast<double>(pt.region_size) / static_cast<double>(cfg.device.cache_capacity_bytes);
    rep.add_row({pt.region_size, ratio, s.count, s.mean, s.median, s.p9999_supported() ? Json(s.p9999) : Json(nullptr),
                 s.p99999_supported() ? Json(s.p99999) : Json(nullptr), s.max, detail::hit_rate_of(node), worst_flash});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Device cache hit rate of irregular lookups versus footprint. Only the tag
// store is exercised; timing does not affect hit rate.

inline std::vector<std::uint64_t> default_footprints(std::uint64_t cache) {
  // Footprint/cache ratios of a ten-size irregular lookup suite (smallest to
  // largest), rounded to whole pages.
  static const double ratios[] = {0.00488, 0.00977, 0.0195, 0.0391, 0.0781, 0.156, 0.3125, 0.625, 1.249, 2.499};
  std::vector<std::uint64_t> out;
  for (double r : ratios) {
    const auto bytes = static_cast<std::uint64_t>(r * static_cast<double>(cache));
    out.push_back(std::max<std::uint64_t>(kPageBytes, bytes / kPageBytes * kPageBytes));
  }
  return out;
}

inline Report run_hit_rate(const ExperimentConfig& cfg) {
  const WorkloadConfig& w = cfg.workload;
  Report rep = cxlsim::detail::new_report(cfg, {"footprint", "footprint_ratio", "hit_rate", "hits", "misses"});
  const auto sizes = w.footprints.empty() ? default_footprints(cfg.device.cache_capacity_bytes) : w.footprints;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    DeviceCacheState cache(cfg.device.cache_capacity_bytes, cfg.device.ways);
    for (std::uint64_t p = 0; p < sizes[i] / kPageBytes; ++p) cache.touch(PageId{p});
    cache.reset_counters();
    const Trace t = gen_irregular(sizes[i], w.lookups, derive_seed(cfg.seed, 3000 + i));
    for (const auto& e : t.entries) cache.touch(PageId::of_addr(e.addr));
    const double ratio = static_cast<double>(sizes[i]) / static_cast<double>(cfg.device.cache_capacity_bytes);
    rep.add_row({sizes[i], ratio, cache.hit_rate(), cache.counters().hits, cache.counters().misses});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Crash consistency: the linked-list insertion case plus random crash plans
// recovered by checkpoint replay.

inline Report run_crash(const ExperimentConfig& cfg) {
  using namespace persist;
  const PersistenceConfig& pc = cfg.persistence;
  Report rep = cxlsim::detail::new_report(cfg, {"plan", "crash_point", "host_evictions", "gpf_pages", "gpf_complete",
                                        "consistent", "first_difference"});
  MachineConfig mc;
  mc.num_regs = pc.num_regs;
  mc.max_region_len = pc.max_region_len;

  {
    auto s = LinkedListScenario::make(mc.num_regs);
    const auto regions = form_regions(s.trace, mc.max_region_len);
    const Image init = initial_image(s.user, regions, s.regs, mc.num_regs);
    PersistentMachine om(mc, init);
    om.regs() = s.regs;
    const Image oracle = execute(s.trace, regions, om).final_state->memory;
    const CrashImage img = inject_crash(s.trace, regions, mc, init, s.regs, LinkedListScenario::str_b_first_plan());
    const VerifyResult v = verify(user_view(img.image), user_view(oracle));
    rep.summary["linked_list.consistent"] = v.consistent ? 1 : 0;
    rep.summary["linked_list.first_difference"] = v.first_difference ? Json(*v.first_difference) : Json(nullptr);
  }

  OpTrace fixed;
  if (!pc.trace_file.empty()) fixed = parse_trace(read_file(pc.trace_file));
  const FlushBudget budget = pc.gpf_budget ? FlushBudget::bytes(*pc.gpf_budget) : FlushBudget::unlimited();
  const GpfScope scope = pc.host_in_persistent_domain ? GpfScope::HostAndDevice : GpfScope::DeviceOnly;
  std::uint64_t ok = 0;
  for (std::uint64_t i = 0; i < pc.plans; ++i) {
    RandomTraceParams tp;
    tp.n_ops = pc.trace_ops;
    tp.n_regs = std::min<std::uint32_t>(8, mc.num_regs);
    const OpTrace trace = pc.trace_file.empty() ? random_trace(tp, derive_seed(cfg.seed, 10'000 + i)) : fixed;
    validate_trace(trace, mc);
    const auto regions = form_regions(trace, mc.max_region_len);
    std::vector<std::uint64_t> regs(mc.num_regs);
    Rng rr(derive_seed(cfg.seed, 20'000 + i));
    for (auto& r : regs) r = rr.below(1000);
    const Image init = initial_image({}, regions, regs, mc.num_regs);
    PersistentMachine om(mc, init);
    om.regs() = regs;
    const Image oracle = execute(trace, regions, om).final_state->memory;
    const CrashPlan plan = random_crash_plan(trace, mc.num_regs, derive_seed(cfg.seed, 30'000 + i), budget, scope);
    const CrashImage img = inject_crash(trace, regions, mc, init, regs, plan);
    VerifyResult v;
    try {
      v = verify(user_view(recover_replay(img.image, trace, regions, mc).memory), user_view(oracle));
    } catch (const UnrecoverableError&) {
      v = {false, std::nullopt};
    }
    ok += v.consistent ? 1 : 0;
    rep.add_row({i, img.crash_point, plan.host_flush_order.size(), img.gpf.dirty_pages_flushed, img.gpf.complete ? 1 : 0,
                 v.consistent ? 1 : 0, v.first_difference ? Json(*v.first_difference) : Json(nullptr)});
  }
  rep.summary["plans"] = pc.plans;
  rep.summary["consistent"] = ok;
  rep.summary["recovery_rate"] = pc.plans ? static_cast<double>(ok) / static_cast<double>(pc.plans) : 1.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Write-ahead logging versus region checkpoints on the same store stream.

inline persist::OpTrace fill_trace(std::uint64_t stores) {
  using persist::AbstractOp;
  persist::OpTrace t;
  for (std::uint64_t i = 0; i < stores; ++i) {
    t.push_back(AbstractOp::compute(1, {1}, 1));
    t.push_back(AbstractOp::store(i * persist::kWordBytes, 1));
  }
  return t;
}

inline Report run_wal(const ExperimentConfig& cfg) {
  using namespace persist;
  const PersistenceConfig& pc = cfg.persistence;
  Report rep = cxlsim::detail::new_report(cfg, {"mode", "persistent_writes", "barriers", "user_stores", "sim_time_ns",
                                        "throughput_ops"});
  MachineConfig mc;
  mc.num_regs = pc.num_regs;
  mc.max_region_len = pc.max_region_len;
  mc.device = cfg.device;
  const OpTrace trace = pc.trace_file.empty() ? fill_trace(pc.stores) : parse_trace(read_file(pc.trace_file));
  validate_trace(trace, mc);
  const auto regions = form_regions(trace, mc.max_region_len);
  const std::vector<std::uint64_t> regs(mc.num_regs, 0);
  const Image init = initial_image({}, regions, regs, mc.num_regs);

  const PersistenceCost wal = cost_of(wal_event_log(trace, mc, init, regs), cfg.device, cfg.host, pc.barrier_cost);
  const PersistenceCost idem =
      cost_of(idempotent_event_log(trace, regions, mc, init, regs), cfg.device, cfg.host, pc.barrier_cost);
  for (const auto& [name, c] : {std::pair{"wal", wal}, std::pair{"idempotent", idem}})
    rep.add_row({name, c.persistent_writes, c.barriers, c.user_stores, c.sim_time, c.throughput()});
  rep.summary["write_ratio"] = static_cast<double>(wal.persistent_writes) / static_cast<double>(idem.persistent_writes);
  rep.summary["throughput_ratio"] = idem.throughput() / wal.throughput();
  return rep;
}

// ---------------------------------------------------------------------------
// Weighted interleaving between a fast and a slow node.

inline Report run_interleave(const ExperimentConfig& cfg) {
  const WorkloadConfig& w = cfg.workload;
  Report rep = cxlsim::detail::new_report(cfg, {"ratio", "fast_share", "throughput_ops", "normalized", "slow_accesses"});
  double base = 0;
  for (std::size_t ri = 0; ri < w.ratios.size(); ++ri) {
    const std::string& ratio = w.ratios[ri];
    const auto colon = ratio.find(':');
    if (colon == std::string::npos) throw ConfigError("interleave ratio must look like 75:25");
    const auto fw = parse_uint_value(detail::trim(ratio.substr(0, colon)));
    const auto sw = parse_uint_value(detail::trim(ratio.substr(colon + 1)));
    if (fw + sw == 0) throw ConfigError("interleave ratio needs a non-zero weight");

    MemTopology topo = build_topology(cfg);
    const auto fast = topo.node_id(w.fast_node), slow = topo.node_id(w.slow_node);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> weights;
    if (fw) weights.emplace_back(fast, static_cast<std::uint32_t>(fw));
    if (sw) weights.emplace_back(slow, static_cast<std::uint32_t>(sw));
    topo.set_policy(AllocPolicy::weighted_interleave(weights));
    Engine<MemTopology> eng(topo, cfg.host);
    detail::warm_pages(eng, 0, w.region_size);
    const std::uint64_t warm_slow = topo.routed_to(slow);

    // Same access sequence for every ratio.
    Rng rng(derive_seed(cfg.seed, 4));
    const std::uint64_t lines = w.region_size / kLineBytes;
    const SimTime t0 = eng.now();
    for (std::uint64_t op = 0; op < w.ops; ++op) {
      for (std::uint64_t a = 0; a < w.accesses_per_op; ++a) {
        eng.issue_access({0, AccessKind::TemporalLoad, rng.below(lines) * kLineBytes, kLineBytes, 0});
        eng.fence(0);
      }
      eng.advance(w.op_compute);
    }
    const double tput = static_cast<double>(w.ops) * 1e9 / static_cast<double>(eng.now() - t0);
    if (ri == 0) base = tput;
    rep.add_row({ratio, static_cast<double>(fw) / static_cast<double>(fw + sw), tput, tput / base,
                 topo.routed_to(slow) - warm_slow});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Key/value access shapes.

inline Report run_kv(const ExperimentConfig& cfg) {
  const WorkloadConfig& w = cfg.workload;
  Report rep = cxlsim::detail::new_report(cfg, {"pattern", "ops", "hit_rate", "throughput_ops", "mean_access_ns"});
  for (std::size_t i = 0; i < w.patterns.size(); ++i) {
    const KvPattern p = parse_kv_pattern(w.patterns[i]);
    MemTopology topo = build_topology(cfg);
    MemNode& node = topo.node(topo.node_id(w.node));
    Engine<MemNode> eng(node, cfg.host);
    const Trace t = gen_kv(p, w.ops, w.value_size, derive_seed(cfg.seed, 5000 + i), w.key_space);
    const auto res = eng.run_batch(t.requests(), cfg.host.mlp_window);
    const double secs = static_cast<double>(res.total()) * 1e-9;
    rep.add_row({w.patterns[i], w.ops, detail::hit_rate_of(node), static_cast<double>(w.ops) / secs,
                 res.amortized_latency()});
  }
  return rep;
}

inline Report run_experiment(const ExperimentConfig& cfg) {
  static const std::map<std::string, std::function<Report(const ExperimentConfig&)>> runners{
      {"calibration", run_calibration}, {"bandwidth", run_bandwidth}, {"tail_sweep", run_tail_sweep},
      {"hit_rate", run_hit_rate},       {"crash", run_crash},         {"wal", run_wal},
      {"interleave", run_interleave},   {"kv", run_kv}};
  auto it = runners.find(cfg.kind);
  if (it == runners.end()) throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
  return it->second(cfg);
}

}  // namespace cxlsim
