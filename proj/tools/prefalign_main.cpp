#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefalign/cli/config.hpp"
#include "prefalign/cli/pipeline.hpp"
#include "prefalign/common/error.hpp"
#include "prefalign/common/log.hpp"

using namespace prefalign;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool mock = false;
  std::string run_dir;
  std::vector<std::string> sets;
  std::string stage_list = "all";
  bool quiet = false;
  bool verbose = false;
};

// File first, then flags.
cli::RunConfig build_config(const Flags& f) {
  cli::RunConfig cfg = f.config.empty() ? cli::RunConfig() : cli::load_config(f.config);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got \"" + kv + "\"");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.mock) cfg.annotator.mock = true;
  if (!f.run_dir.empty()) cfg.run_dir = f.run_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prefalign: preference alignment pipeline for managerial review responses"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "TOML config file")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "global seed (overrides the config)");
  app.add_flag("--mock", f.mock, "use the offline mock annotator; network access is refused");
  app.add_option("--run-dir", f.run_dir, "run directory (overrides paths.run_dir)");
  app.add_option("--set", f.sets, "override a config key, e.g. --set pref.beta=0.2")->allow_extra_args(false);
  app.add_flag("-q,--quiet", f.quiet, "warnings and errors only");
  app.add_flag("-v,--verbose", f.verbose, "debug logging");

  auto* run = app.add_subcommand("run", "run several stages in order");
  run->add_option("--stage-list", f.stage_list, "comma-separated stages or \"all\"");

  std::vector<CLI::App*> stage_cmds;
  for (const auto& s : cli::pipeline_stages()) {
    stage_cmds.push_back(app.add_subcommand(s, s == "make-toy" ? "write a synthetic review corpus" : "run stage " + s));
  }
  auto* bench = app.add_subcommand("theorybench", "tabular gap experiment (CSV, SVG, summary)");
  auto* plot = app.add_subcommand("plot", "SVG plots from an existing run directory");
  auto* show = app.add_subcommand("config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (f.quiet) set_log_level(LogLevel::Warn);
  if (f.verbose) set_log_level(LogLevel::Debug);

  try {
    const cli::RunConfig cfg = build_config(f);
    if (show->parsed()) {
      for (const auto& [k, v] : cfg.values()) std::cout << k << " = " << v << '\n';
      return 0;
    }
    if (bench->parsed()) return cli::theorybench_cmd(cfg);
    if (plot->parsed()) return cli::plot_cmd(cfg);
    if (run->parsed()) return cli::run_pipeline(cfg, cli::parse_stage_list(f.stage_list));
    for (auto* sc : stage_cmds) {
      if (sc->parsed()) return cli::run_pipeline(cfg, {sc->get_name()});
    }
  } catch (const std::exception& e) {
    log_message(LogLevel::Error, e.what());
    return 1;
  }
  return 1;
}
