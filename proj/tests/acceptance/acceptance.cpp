// Acceptance run: one PASS/FAIL line per criterion. Experiments use the
// shipped configs/ files.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cxlsim/cxlsim.hpp"
#include "../reference_cache.hpp"

using namespace cxlsim;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::map<std::string, Report> g_reports;

ExperimentConfig config(const std::string& name) { return load_config(std::string(CXLSIM_CONFIG_DIR) + "/" + name + ".ini"); }

const Report& run(const std::string& name) {
  auto it = g_reports.find(name);
  if (it == g_reports.end()) it = g_reports.emplace(name, run_experiment(config(name))).first;
  return it->second;
}

bool within(double v, double target, double rel) { return std::fabs(v - target) <= rel * target; }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome calibration() {
  Outcome o;
  double secs = timed([] { run("calibration"); });
  const Report& r = run("calibration");
  const std::pair<const char*, double> targets[] = {{"CMM-H.mlc", 728.9}, {"CMM-H.ld", 56.7},  {"CMM-H.st", 114.9},
                                                    {"CMM-H.nt-st", 16.0}, {"DDR5-L.mlc", 122.9}, {"DDR5-R.mlc", 216.0}};
  for (const auto& [key, want] : targets) {
    const double got = r.metric(key);
    o.check(within(got, want, 0.05), std::string(key) + " = " + fmt(got) + ", want " + fmt(want) + " +/-5%");
  }
  o.check(secs < 30, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "CMM-H mlc " + fmt(r.metric("CMM-H.mlc")) + ", ld " + fmt(r.metric("CMM-H.ld")) + ", " + fmt(secs) + " s";
  return o;
}

Outcome bandwidth() {
  Outcome o;
  double secs = timed([] { run("bandwidth"); });
  const Report& r = run("bandwidth");
  const double peak = r.metric("max_gbps.ld");
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (r.cell(i, "kind") != "ld" || r.number(i, "threads") < 4) continue;
    const double g = r.number(i, "gbps");
    o.check(g >= 0.95 * peak, fmt(r.number(i, "threads")) + " threads at " + fmt(g) + " GB/s, below 95% of " + fmt(peak));
  }
  o.check(within(peak, 4.5, 0.10), "plateau " + fmt(peak) + " GB/s, want 4.5 +/-10%");
  o.check(secs < 60, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "ld plateau " + fmt(peak) + " GB/s, " + fmt(secs) + " s";
  return o;
}

Outcome tail_sweep() {
  Outcome o;
  double secs = timed([] { run("tail_sweep"); });
  const Report& r = run("tail_sweep");
  const FlashConfig flash = config("tail_sweep").device.flash;
  std::vector<std::size_t> below, above;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    o.check(r.number(i, "batches") >= 200'000, "fewer than 2e5 samples at row " + std::to_string(i));
    (r.number(i, "region_ratio") <= 1.0 ? below : above).push_back(i);
  }
  o.check(!below.empty() && above.size() >= 2, "sweep needs points on both sides of capacity");
  for (const char* col : {"p9999", "p99999"}) {
    if (below.empty()) break;
    const double ref = r.number(below.front(), col);
    for (auto i : below) o.check(within(r.number(i, col), ref, 0.15), std::string(col) + " not flat below capacity");
    double prev = r.number(below.back(), col);
    for (auto i : above) {
      o.check(r.number(i, col) > prev, std::string(col) + " not strictly increasing beyond capacity");
      prev = r.number(i, col);
    }
  }
  for (auto i : above)
    o.check(r.number(i, "max") >= static_cast<double>(flash.read_service), "max below one flash read");
  o.check(secs < 300, "runtime " + fmt(secs) + " s");
  if (o.pass && !above.empty())
    o.detail = "p99.99 " + fmt(r.number(below.front(), "p9999")) + " -> " + fmt(r.number(above.back(), "p9999")) + " ns, " +
               fmt(secs) + " s";
  return o;
}

Outcome hit_rate() {
  Outcome o;
  double secs = timed([] { run("hit_rate"); });
  const Report& r = run("hit_rate");
  std::vector<double> super;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const double ratio = r.number(i, "footprint_ratio"), h = r.number(i, "hit_rate");
    if (ratio <= 1.0) o.check(h >= 0.999, "hit rate " + fmt(h) + " at ratio " + fmt(ratio));
    else super.push_back(h);
  }
  o.check(super.size() == 2, "expected two super-capacity footprints");
  if (super.size() == 2) o.check(super[1] < super[0], "hit rate not decreasing beyond capacity");
  o.check(secs < 120, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "super-capacity " + fmt(super[0]) + " > " + fmt(super[1]) + ", " + fmt(secs) + " s";
  return o;
}

Outcome cache_oracle() {
  Outcome o;
  std::uint64_t agree = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    DeviceCacheState c(256 * 8 * kPageBytes, 8);
    cxlsim_test::ReferenceCache ref(c.num_sets(), 8);
    Rng rng(derive_seed(seed, 77));
    bool same = true;
    for (int i = 0; i < 100'000 && same; ++i) {
      const std::uint64_t page = rng.below(c.num_sets() * 8 * 3);
      const bool write = rng.below(4) == 0;
      const TouchResult t = c.touch(PageId{page});
      if (write) c.block(PageId{page}, t.way).dirty = true;
      const auto want = ref.access(page, write);
      same = t.hit == want.hit && t.evicted.has_value() == want.evicted.has_value() &&
             (!t.evicted || (t.evicted->page.value == *want.evicted && t.evicted->dirty == want.evicted_dirty));
    }
    agree += same ? 1 : 0;
    ++total;
  }
  o.check(agree == total, std::to_string(agree) + "/" + std::to_string(total) + " seeds agree");
  if (o.pass) o.detail = "50/50 seeds x 1e5 accesses identical";
  return o;
}

Outcome crash() {
  Outcome o;
  double secs = timed([] { run("crash"); });
  const Report& r = run("crash");
  o.check(r.metric("linked_list.consistent") == 0, "linked-list crash image did not diverge");
  o.check(r.summary.at("linked_list.first_difference") == persist::LinkedListScenario::kNewNext,
          "first difference not at the new node's next field");
  o.check(r.metric("plans") == 1000 && r.metric("consistent") == 1000,
          fmt(r.metric("consistent")) + "/" + fmt(r.metric("plans")) + " consistent");
  o.check(secs < 60, "runtime " + fmt(secs) + " s");
  if (o.pass) o.detail = "Divergent at 0x300; 1000/1000 recovered, " + fmt(secs) + " s";
  return o;
}

Outcome region_formation() {
  Outcome o;
  using namespace persist;
  RandomTraceParams p;
  std::uint64_t bad = 0;
  for (std::uint64_t seed = 0; seed < 10'000; ++seed) {
    p.n_ops = 1 + seed % 400;
    const OpTrace t = random_trace(p, derive_seed(seed, 5));
    const auto rs = form_regions(t, 64);
    OpTrace joined;
    bool ok = true;
    for (const auto& r : rs) {
      for (std::size_t i = r.start; i < r.end && ok; ++i)
        for (std::size_t j = i + 1; j < r.end; ++j)
          if (t[i].kind == OpKind::Load && t[j].kind == OpKind::Store && t[i].addr == t[j].addr) ok = false;
      joined.insert(joined.end(), t.begin() + static_cast<std::ptrdiff_t>(r.start),
                    t.begin() + static_cast<std::ptrdiff_t>(r.end));
    }
    if (!ok || joined != t) ++bad;
  }
  o.check(bad == 0, std::to_string(bad) + " of 10000 traces failed");
  if (o.pass) o.detail = "10000 traces WAR-free and concatenation exact";
  return o;
}

Outcome wal() {
  Outcome o;
  const Report& r = run("wal");
  o.check(r.metric("write_ratio") >= 2.0, "write ratio " + fmt(r.metric("write_ratio")));
  o.check(r.metric("throughput_ratio") > 1.0, "idempotent/WAL throughput " + fmt(r.metric("throughput_ratio")));
  if (o.pass)
    o.detail = "writes " + fmt(r.metric("write_ratio")) + "x, throughput " + fmt(r.metric("throughput_ratio")) + "x";
  return o;
}

Outcome determinism() {
  Outcome o;
  for (const char* name : {"calibration", "bandwidth", "tail_sweep", "hit_rate", "crash", "wal", "interleave", "kv"}) {
    Report a = run(name);
    Report b = run_experiment(config(name));
    o.check(determinism_hash(a) == determinism_hash(b), std::string(name) + " hash differs");
    a.timestamp = b.timestamp = "";
    o.check(to_json(a).dump() == to_json(b).dump() && to_csv(a) == to_csv(b), std::string(name) + " bytes differ");
  }
  if (o.pass) o.detail = "8 experiments re-run byte-identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"calibration fit", calibration},
      {"bandwidth saturation", bandwidth},
      {"tail-latency knee", tail_sweep},
      {"hit-rate trend", hit_rate},
      {"cache oracle equivalence", cache_oracle},
      {"crash consistency", crash},
      {"region formation", region_formation},
      {"WAL elimination", wal},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %zu: %s (%s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
