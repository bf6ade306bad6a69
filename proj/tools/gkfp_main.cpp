// Command-line front end: reproducible named experiment suites.

#include "gkfp/suites.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
  CLI::App app{"desk-scale spectral checks for kinetic Fokker-Planck operators"};
  app.require_subcommand(0, 1);

  std::string config_path, suite, out_dir;
  uint64_t seed = 0;
  int jobs = 0;
  bool print_defaults = false;

  CLI::App* run = app.add_subcommand("run", "run a named suite and write reports");
  run->add_option("--config", config_path, "config file (key = value sections)");
  run->add_option("--suite", suite, "suite name (see list-suites)");
  run->add_option("--jobs", jobs, "worker pool size for sweep cells");
  run->add_option("--seed", seed, "seed for test-vector generation");
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--print-defaults", print_defaults, "print the default config and exit");

  CLI::App* list = app.add_subcommand("list-suites", "list suite names and descriptions");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& info : gkfp::list_suites())
      std::cout << info.name << "  -  " << info.description << "\n";
    return 0;
  }
  if (print_defaults) {
    std::cout << gkfp::RunConfig::defaults().to_text();
    return 0;
  }
  if (!run->parsed()) {
    std::cout << app.help();
    return 0;
  }

  gkfp::RunConfig cfg = gkfp::RunConfig::defaults();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "config error: cannot open " << config_path << "\n";
      return 1;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      cfg = gkfp::RunConfig::parse(ss.str());
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 1;
    }
  }
  if (!suite.empty()) cfg.suite = suite;
  if (!out_dir.empty()) cfg.output = out_dir;
  if (seed != 0) cfg.seed = seed;
  if (jobs != 0) cfg.jobs = jobs;

  return gkfp::run_and_write(cfg, std::cout);
}
