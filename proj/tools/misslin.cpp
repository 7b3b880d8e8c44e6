#include "misslin/classifiers.hpp"
#include "misslin/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitViolation = 3;

misslin::KeyValues read_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw misslin::ConfigError(path, 0, "", "cannot open grid file");
  std::stringstream ss;
  ss << in.rdbuf();
  return misslin::KeyValues::parse(ss.str(), path);
}

int emit(const misslin::SweepTable& table, const std::string& out, bool strict) {
  if (out.empty() || out == "-") {
    table.write_csv(std::cout);
  } else {
    std::ofstream f(out);
    if (!f) throw misslin::Error("cannot write " + out);
    table.write_csv(f);
  }
  if (table.violations > 0) std::cerr << table.violations << " violating row(s)\n";
  return strict && table.violations > 0 ? kExitViolation : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"misslin: linear classification with missing inputs"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Run a simulation study from a config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool no_timing = false;
  std::optional<int> threads;
  std::vector<std::string> overrides;
  bool quiet = false;
  simulate->add_option("--config", config_path, "Config file or builtin name (e.g. fig1-lda-mcar)")->required();
  simulate->add_option("--seed", seed, "Override the seed");
  simulate->add_option("--out", out, "Output CSV (default: config `output`, else stdout)");
  simulate->add_flag("--no-timing", no_timing, "Write 0 in wall_time_ms");
  simulate->add_option("--threads", threads, "Worker threads");
  simulate->add_option("--set", overrides, "Override a config key: key=value (repeatable)");
  simulate->add_flag("--quiet", quiet, "No progress on stderr");

  auto* bounds = app.add_subcommand("bounds", "Evaluate a bound grid");
  std::string bounds_grid;
  std::string bounds_out;
  bool strict = false;
  bounds->add_option("--grid", bounds_grid, "Grid file")->required();
  bounds->add_option("--out", bounds_out, "Output CSV (default stdout)");
  bounds->add_flag("--strict", strict, "Exit 3 if any row violates its inequality");

  auto* separability = app.add_subcommand("separability", "Evaluate a separability grid");
  std::string sep_grid;
  std::string sep_out;
  bool sep_strict = false;
  separability->add_option("--grid", sep_grid, "Grid file")->required();
  separability->add_option("--out", sep_out, "Output CSV (default stdout)");
  separability->add_flag("--strict", sep_strict, "Exit 3 if any row fails");

  auto* presets = app.add_subcommand("presets", "Model presets and builtin configs");
  auto* presets_list = presets->add_subcommand("list", "List presets, builtin configs and classifier ids");
  presets->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) {
      misslin::ExperimentConfig cfg = misslin::load_config(config_path);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw misslin::ConfigError("--set", 0, kv, "expected key=value");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1), "--set");
      }
      if (seed) cfg.seed = *seed;
      if (threads) cfg.set("threads", std::to_string(*threads), "--threads");
      if (!out.empty()) cfg.output = out;
      cfg.validate();
      misslin::RunOptions opts;
      opts.timing = !no_timing;
      opts.progress = quiet ? nullptr : &std::cerr;
      const auto rows = misslin::run_experiment(cfg, opts);
      if (cfg.output.empty() || cfg.output == "-") {
        misslin::write_results_csv(std::cout, rows);
      } else {
        std::ofstream f(cfg.output);
        if (!f) throw misslin::Error("cannot write " + cfg.output);
        misslin::write_results_csv(f, rows);
      }
      return 0;
    }
    if (*bounds) return emit(misslin::run_bounds_sweep(read_grid(bounds_grid)), bounds_out, strict);
    if (*separability) return emit(misslin::run_separability_sweep(read_grid(sep_grid)), sep_out, sep_strict);
    if (*presets_list) {
      std::cout << "presets:\n";
      for (const auto& p : misslin::preset_list()) std::cout << "  " << p.name << "  " << p.description << '\n';
      std::cout << "configs:\n";
      for (const auto& c : misslin::builtin_config_names()) std::cout << "  " << c << '\n';
      std::cout << "classifiers:\n";
      for (const auto& id : misslin::classifier_ids()) std::cout << "  " << id << '\n';
      return 0;
    }
  } catch (const misslin::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
