// Acceptance suite: every release criterion at its stated tolerance, one
// pass/fail line per criterion.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gkfp/estimates.hpp"
#include "gkfp/report.hpp"
#include "gkfp/suites.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <string>

using namespace gkfp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct SuiteCache {
  std::map<std::string, SuiteResult> results;
  std::map<std::string, double> runtimes;

  const SuiteResult& get(const std::string& suite) {
    auto it = results.find(suite);
    if (it != results.end()) return it->second;
    RunConfig cfg = RunConfig::defaults();
    cfg.suite = suite;
    const auto t0 = Clock::now();
    SuiteResult r = run_suite(cfg);
    runtimes[suite] = seconds_since(t0);
    return results.emplace(suite, std::move(r)).first->second;
  }
};

SuiteCache cache;

bool checks_pass(const SuiteResult& r, const std::string& id_prefix, int* count = nullptr) {
  bool ok = true;
  int n = 0;
  for (const CheckRecord& rec : r.records) {
    if (rec.check_id.rfind(id_prefix, 0) == 0) {
      ++n;
      if (rec.status != CheckStatus::pass) ok = false;
    }
  }
  if (count) *count = n;
  return ok && n > 0;
}

void report(int criterion, bool pass, const std::string& what) {
  std::printf("[criterion %2d] %s  %s\n", criterion, pass ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  CHECK(pass);
}

}  // namespace

TEST_CASE("1. exact operator structure at N = 32, d = 2 in under 5 s") {
  const auto t0 = Clock::now();
  const SuiteResult& r = cache.get("identities");
  const double elapsed = seconds_since(t0);
  const bool pass = checks_pass(r, "number_spectrum_exact") &&
                    checks_pass(r, "oscillator_split_identity") &&
                    checks_pass(r, "positivity_identity") && elapsed < 5.0;
  report(1, pass, "ladder spectrum exact; both matrix identities at 1e-12 (" +
                      std::to_string(elapsed) + " s)");
}

TEST_CASE("2. fiber spectra match n + 1/2 + xi^2/2 to 1e-6 in under 10 s") {
  const auto t0 = Clock::now();
  bool pass = true;
  double worst = 0;
  for (double xi : {0.0, 1.0, 2.0, 4.0}) {
    try {
      const int cutoff = fiber_cutoff_for(xi, 33);
      const auto eig = fiber_spectrum_accurate(xi, 33, cutoff);
      for (int n = 0; n <= 32; ++n)
        worst = std::max(worst, std::abs(eig[n] - (n + 0.5 + xi * xi / 2.0)));
    } catch (const std::exception&) {
      pass = false;
    }
  }
  const double elapsed = seconds_since(t0);
  pass = pass && worst < 1e-6 && elapsed < 10.0;
  report(2, pass, "worst deviation " + std::to_string(worst) + " over xi in {0,1,2,4} (" +
                      std::to_string(elapsed) + " s)");
}

TEST_CASE("3. airy resolvent scaling: exponent -2/3 +- 0.02 and exact relation, under 60 s") {
  const auto t0 = Clock::now();
  const SuiteResult& r = cache.get("airy-scan");
  double slope = 0, exact_rel = 1;
  for (const CheckRecord& rec : r.records) {
    if (rec.check_id == "airy_resolvent_exponent") slope = rec.value;
    if (rec.check_id == "airy_resolvent_exact_scaling") exact_rel = rec.value;
  }
  const double elapsed = cache.runtimes.count("airy-scan") ? cache.runtimes["airy-scan"]
                                                            : seconds_since(t0);
  const bool pass = checks_pass(r, "airy_resolvent_exponent") &&
                    checks_pass(r, "airy_resolvent_exact_scaling") && elapsed < 60.0;
  report(3, pass, "fitted slope " + std::to_string(slope) + ", exact-relation residual " +
                      std::to_string(exact_rel) + " (" + std::to_string(elapsed) + " s)");
}

TEST_CASE("4. airy bound finite with sup drift below 10% under doubling") {
  const SuiteResult& r = cache.get("airy-scan");
  const bool pass = checks_pass(r, "airy_bound_cell") && checks_pass(r, "airy_bound_sup_drift");
  double drift = 1;
  for (const CheckRecord& rec : r.records)
    if (rec.check_id == "airy_bound_sup_drift") drift = rec.value;
  report(4, pass, "all sweep cells finite; sup drift " + std::to_string(drift));
}

TEST_CASE("5. euclidean bound finite, sweep-stable, rescale-invariant to 1%") {
  const SuiteResult& r = cache.get("euclid-verify");
  const bool pass = checks_pass(r, "euclid_bound_cell") &&
                    checks_pass(r, "euclid_bound_sup_drift") &&
                    checks_pass(r, "euclid_bound_rescale");
  report(5, pass, "constant finite across the lambda sweep and (b,h) rescalings");
}

TEST_CASE("6. accretivity floors hold with zero negative margins") {
  const SuiteResult& r = cache.get("euclid-verify");
  const bool pass = checks_pass(r, "accretivity_floor_c0") &&
                    checks_pass(r, "refined_accretivity_paper_rule") &&
                    checks_pass(r, "refined_accretivity_threshold");
  report(6, pass, "integration-by-parts floor and refined shell floor, threshold located");
}

TEST_CASE("7. partition identities, commutators and localization inequalities") {
  const SuiteResult& r = cache.get("partition-check");
  const bool pass = checks_pass(r, "dyadic_identity") && checks_pass(r, "grid_identity") &&
                    checks_pass(r, "transport_kills_dyadic") &&
                    checks_pass(r, "first_commutator_stencil_order") &&
                    checks_pass(r, "second_commutator_stencil_order") &&
                    checks_pass(r, "grid_commutator_multiplier_form") &&
                    checks_pass(r, "grid_double_commutator_zero") &&
                    checks_pass(r, "localization_oscillator") &&
                    checks_pass(r, "localization_gkfp");
  report(7, pass, "identities at 1e-12, transport annihilation at 1e-10, bounds on 100 states");
}

TEST_CASE("8. dyadic operator equivalence with constants 1/4 and 5/2") {
  const SuiteResult& r = cache.get("partition-check");
  int cells = 0;
  const bool pass = checks_pass(r, "dyadic_equivalence", &cells);
  report(8, pass, "located kappa_b per b with " + std::to_string(cells) + " equivalence checks");
}

TEST_CASE("9. slowness and temperance with zero failures on 1e5 pairs") {
  const SuiteResult& r = cache.get("metric-cert");
  const bool pass = checks_pass(r, "slowness") && checks_pass(r, "temperance");
  report(9, pass, "R = 2^12 slowness and 64(1+|X-X'|^2)^3 temperance");
}

TEST_CASE("10. sobolev norm characterizations agree with stable constants") {
  const SuiteResult& r = cache.get("sobolev-equiv");
  const bool pass = checks_pass(r, "norm_ii_vs_iv") && checks_pass(r, "norm_ii_vs_iii") &&
                    checks_pass(r, "two_index_embedding");
  report(10, pass, "(ii)/(iii)/(iv) equivalences for s in {1,2}; embedding on 100 states");
}

TEST_CASE("11. quasimode residual times b^2 constant within 5%") {
  const SuiteResult& r = cache.get("quasimode");
  const bool pass = checks_pass(r, "residual_b2_constancy") &&
                    checks_pass(r, "transport_residual");
  report(11, pass, "flat and perturbed 1D metric, b in {1,2,4,8}");
}

TEST_CASE("12. oscillator comparison difference bound has slope 1 +- 0.05") {
  const SuiteResult& r = cache.get("oscillator-compare");
  const bool pass = checks_pass(r, "difference_bound_slope") &&
                    checks_pass(r, "identical_metrics") &&
                    checks_pass(r, "doubled_metric_stability");
  report(12, pass, "fitted slope within 0.05 of 1");
}

TEST_CASE("13. full suite under 10 minutes, byte-reproducible under a fixed seed") {
  RunConfig cfg = RunConfig::defaults();
  cfg.suite = "full";
  cfg.seed = 42;
  cfg.jobs = 1;
  const auto t0 = Clock::now();
  SuiteResult first = run_suite(cfg);
  const double elapsed = seconds_since(t0);
  SuiteResult second = run_suite(cfg);
  const std::string csv1 = records_to_csv(first.records);
  const std::string csv2 = records_to_csv(second.records);
  int fails = 0;
  for (const CheckRecord& rec : first.records)
    if (rec.status == CheckStatus::fail) ++fails;
  const bool pass = elapsed < 600.0 && csv1 == csv2 && fails == 0;
  report(13, pass, "full suite " + std::to_string(first.records.size()) + " checks, " +
                       std::to_string(fails) + " failed, " + std::to_string(elapsed) +
                       " s, reproducible=" + (csv1 == csv2 ? "yes" : "no"));
}
