// Named experiment suites and their reproducible runner.

#pragma once

#include "gkfp/report.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace gkfp {

struct RunConfig {
  std::string suite = "full";
  // basis
  int N = 32;
  int d = 2;
  double P = 12.0;
  int M = 256;
  // metric preset
  std::string metric = "sin1d:0.1";
  // sweeps
  std::vector<double> b_sweep = {0.25, 1, 4};
  std::vector<double> h_sweep = {1};
  std::vector<int> ell_sweep = {-1, 0, 1, 2};
  std::vector<double> xi_sweep = {0, 1, 2, 4};
  std::vector<double> lambda_sweep = {0, 4, 64};
  std::vector<double> A_sweep = {1, 2, 4, 8};
  // tolerances
  double identity_tol = 1e-12;
  double drift_tol = 0.10;
  double fit_tol = 0.02;
  // run control
  uint64_t seed = 42;
  int jobs = 1;
  std::string output = "out";

  static RunConfig defaults();
  /// Plain-text nested key = value sections; round-trips with parse().
  std::string to_text() const;
  /// Throws std::runtime_error with a line number on malformed keys.
  static RunConfig parse(const std::string& text);
  void validate() const;  // nonempty sweeps, positive tolerances
};

struct SuiteResult {
  std::vector<CheckRecord> records;
  /// Extra named tables (filename -> CSV body), e.g. partition tables.
  std::map<std::string, std::string> tables;
  bool all_pass() const;
};

struct SuiteInfo {
  std::string name;
  std::string description;
};

/// identities, airy-scan, euclid-verify, partition-check, metric-cert,
/// sobolev-equiv, quasimode, oscillator-compare, full.
std::vector<SuiteInfo> list_suites();

/// Runs one named suite (or all, for "full"). Throws on unknown suite.
SuiteResult run_suite(const RunConfig& config);

/// Full front end: runs the suite and writes report.json, summary.csv and the
/// suite tables into config.output. Returns the process exit code
/// (0 = all checks pass, 1 = config/IO error, 2 = check failure).
int run_and_write(const RunConfig& config, std::ostream& log);

}  // namespace gkfp
