// stackmf: run, validate and list convergence experiments.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "stackmf/cli.hpp"
#include "stackmf/parallel.hpp"

using namespace stackmf;

namespace {

// A config argument is a JSON file, or the name of a preset.
cli::ScenarioConfig resolve(const std::string& arg) {
  if (!std::filesystem::exists(arg)) {
    for (const auto& p : cli::presets()) {
      if (p.name == arg) return p.config;
    }
  }
  return cli::load_config(arg);
}

std::size_t thread_count(int flag) {
  if (flag > 0) return static_cast<std::size_t>(flag);
  if (const char* env = std::getenv("STACKMF_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "ignoring invalid STACKMF_THREADS='" << env << "'\n";
  }
  return default_thread_count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convergence experiments for delayed leader/follower mean-field games"};
  app.set_version_flag("--version", std::string(STACKMF_VERSION));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment from a config file or preset name");
  std::string run_cfg, out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool dry_run = false;
  run->add_option("config", run_cfg, "config JSON or preset name")->required();
  run->add_option("--threads", threads, "worker threads (default: STACKMF_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  auto* seed_opt = run->add_option("--seed", seed, "override the master seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--dry-run", dry_run, "validate and print the plan without simulating");

  auto* presets = app.add_subcommand("presets", "preset scenarios");
  presets->require_subcommand(1);
  auto* list = presets->add_subcommand("list", "list preset names");
  auto* show = presets->add_subcommand("show", "print a preset as JSON");
  std::string preset_name;
  show->add_option("name", preset_name)->required();

  auto* validate = app.add_subcommand("validate", "check a config file");
  std::string validate_cfg;
  validate->add_option("config", validate_cfg)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::exit_ok : cli::exit_config;
  }

  try {
    if (*list) {
      for (const auto& p : cli::presets()) std::cout << p.name << "  " << p.description << "\n";
      return cli::exit_ok;
    }
    if (*show) {
      std::cout << cli::to_json(cli::find_preset(preset_name).config);
      return cli::exit_ok;
    }
    if (*validate) {
      const auto cfg = resolve(validate_cfg);
      std::cout << cfg.name << ": valid\n";
      return cli::exit_ok;
    }
    cli::RunOptions opts;
    opts.threads = thread_count(threads);
    if (*seed_opt) opts.seed = seed;
    if (!out_dir.empty()) opts.output_dir = out_dir;
    opts.dry_run = dry_run;
    const auto res = cli::run_experiment(resolve(run_cfg), opts, std::cout);
    if (res.exit_code == cli::exit_invalid) {
      std::cerr << "experiment invalid: " << res.reason << "\n";
    }
    return res.exit_code;
  } catch (const cli::ConfigError& e) {
    std::cerr << e.what() << "\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return cli::exit_config;
}
