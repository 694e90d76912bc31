// cxlsim command-line front end.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cxlsim/cxlsim.hpp"

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kConfig = 2, kCompareFailed = 3 };

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
            std::optional<std::string> format) {
  cxlsim::ExperimentConfig cfg = cxlsim::load_config(path);
  if (seed) {
    cfg.seed = *seed;
    cfg.device.flash.jitter_seed = cxlsim::derive_seed(cfg.seed, 0xf1a5);
    cfg.echo["experiment"]["seed"] = std::to_string(*seed);
  }
  if (out) cfg.output.dir = *out;
  if (format) cfg.output.format = *format;
  const cxlsim::Report rep = cxlsim::run_experiment(cfg);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& p : cxlsim::write_report(rep, cfg.output.dir, cfg.output.format)) std::cout << p.string() << "\n";
  return kOk;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& tol) {
  const auto spec = cxlsim::ToleranceSpec::parse(tol);
  const auto res = cxlsim::compare_reports(cxlsim::load_report(a), cxlsim::load_report(b), spec);
  std::cout << cxlsim::format_comparison(res);
  return res.pass() ? kOk : kCompareFailed;
}

int cmd_list_generators() {
  for (const auto& g : cxlsim::generator_registry())
    std::cout << g.name << "(" << g.params << ")\n    " << g.description << "\n";
  std::cout << "\nexperiment kinds:";
  for (auto k : cxlsim::experiment_kinds()) std::cout << " " << k;
  std::cout << "\n";
  return kOk;
}

int cmd_validate(const std::string& path) {
  const cxlsim::ExperimentConfig cfg = cxlsim::load_config(path);
  std::cout << path << ": ok (" << cfg.kind << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CXL hybrid-memory simulator"};
  app.require_subcommand(1);

  std::string run_cfg;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, format;
  auto* run = app.add_subcommand("run", "run an experiment config and write reports");
  run->add_option("config", run_cfg, "config file")->required();
  run->add_option("--seed", seed, "override [experiment] seed");
  run->add_option("--out", out, "output directory");
  run->add_option("--format", format, "csv | json | both")->check(CLI::IsMember({"csv", "json", "both"}));

  std::string cmp_a, cmp_b, tol = "5%";
  auto* cmp = app.add_subcommand("compare", "compare two reports metric by metric");
  cmp->add_option("a", cmp_a, "reference report (.json or .csv)")->required();
  cmp->add_option("b", cmp_b, "candidate report")->required();
  cmp->add_option("--tol", tol, "e.g. 5% or 5%,p9999=10%");

  auto* gens = app.add_subcommand("list-generators", "list workload generators");

  std::string val_cfg;
  auto* val = app.add_subcommand("validate", "schema-check a config file");
  val->add_option("config", val_cfg, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_cfg, seed, out, format);
    if (*cmp) return cmd_compare(cmp_a, cmp_b, tol);
    if (*gens) return cmd_list_generators();
    if (*val) return cmd_validate(val_cfg);
  } catch (const cxlsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const cxlsim::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
