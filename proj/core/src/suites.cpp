#include "gkfp/suites.hpp"

#include "gkfp/estimates.hpp"
#include "gkfp/geometry.hpp"
#include "gkfp/operators.hpp"
#include "gkfp/partitions.hpp"
#include "gkfp/rng.hpp"
#include "gkfp/sobolev.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <atomic>
#include <thread>

namespace gkfp {

namespace {

// ---- config text format -----------------------------------------------

std::string join_list(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

std::string join_list(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<double> parse_list(const std::string& text, int line_no) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": malformed number '" + item + "'");
    }
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

std::string RunConfig::to_text() const {
  std::string out;
  out += "suite = " + suite + "\n";
  out += "seed = " + std::to_string(seed) + "\n";
  out += "jobs = " + std::to_string(jobs) + "\n";
  out += "output = " + output + "\n";
  out += "\n[basis]\n";
  out += "N = " + std::to_string(N) + "\n";
  out += "d = " + std::to_string(d) + "\n";
  out += "P = " + format_double(P) + "\n";
  out += "M = " + std::to_string(M) + "\n";
  out += "\n[metric]\n";
  out += "preset = " + metric + "\n";
  out += "\n[sweep]\n";
  out += "b = " + join_list(b_sweep) + "\n";
  out += "h = " + join_list(h_sweep) + "\n";
  out += "ell = " + join_list(ell_sweep) + "\n";
  out += "xi = " + join_list(xi_sweep) + "\n";
  out += "lambda = " + join_list(lambda_sweep) + "\n";
  out += "A = " + join_list(A_sweep) + "\n";
  out += "\n[tolerances]\n";
  out += "identity_tol = " + format_double(identity_tol) + "\n";
  out += "drift_tol = " + format_double(drift_tol) + "\n";
  out += "fit_tol = " + format_double(fit_tol) + "\n";
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto fail = [&]() {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" +
                               key + "' in section '" + section + "'");
    };
    try {
      if (section.empty()) {
        if (key == "suite") cfg.suite = value;
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "jobs") cfg.jobs = std::stoi(value);
        else if (key == "output") cfg.output = value;
        else fail();
      } else if (section == "basis") {
        if (key == "N") cfg.N = std::stoi(value);
        else if (key == "d") cfg.d = std::stoi(value);
        else if (key == "P") cfg.P = std::stod(value);
        else if (key == "M") cfg.M = std::stoi(value);
        else fail();
      } else if (section == "metric") {
        if (key == "preset") cfg.metric = value;
        else fail();
      } else if (section == "sweep") {
        if (key == "b") cfg.b_sweep = parse_list(value, line_no);
        else if (key == "h") cfg.h_sweep = parse_list(value, line_no);
        else if (key == "ell") {
          cfg.ell_sweep.clear();
          for (double v : parse_list(value, line_no)) cfg.ell_sweep.push_back(static_cast<int>(v));
        } else if (key == "xi") cfg.xi_sweep = parse_list(value, line_no);
        else if (key == "lambda") cfg.lambda_sweep = parse_list(value, line_no);
        else if (key == "A") cfg.A_sweep = parse_list(value, line_no);
        else fail();
      } else if (section == "tolerances") {
        if (key == "identity_tol") cfg.identity_tol = std::stod(value);
        else if (key == "drift_tol") cfg.drift_tol = std::stod(value);
        else if (key == "fit_tol") cfg.fit_tol = std::stod(value);
        else fail();
      } else {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": unknown section '" + section + "'");
      }
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": malformed value for '" + key + "'");
    }
  }
  return cfg;
}

void RunConfig::validate() const {
  if (b_sweep.empty() || h_sweep.empty() || ell_sweep.empty() || xi_sweep.empty() ||
      lambda_sweep.empty() || A_sweep.empty())
    throw std::runtime_error("config: every sweep list must be nonempty");
  if (!(identity_tol > 0) || !(drift_tol > 0) || !(fit_tol > 0))
    throw std::runtime_error("config: tolerances must be positive");
  if (N < 2 || d < 1 || M < 8 || !(P > 0)) throw std::runtime_error("config: invalid basis block");
  if (jobs < 1) throw std::runtime_error("config: jobs must be >= 1");
}

bool SuiteResult::all_pass() const {
  for (const CheckRecord& r : records)
    if (r.status == CheckStatus::fail) return false;
  return true;
}

std::vector<SuiteInfo> list_suites() {
  return {
      {"identities", "exact operator structure: ladders, commutation, matrix identities"},
      {"airy-scan", "complex Airy resolvent scaling and the four-term bound"},
      {"euclid-verify", "euclidean fiber spectra, subelliptic constants, accretivity floor"},
      {"partition-check", "dyadic/grid partition identities, commutators, localization"},
      {"metric-cert", "phase-space weight slowness/temperance and chart certificates"},
      {"sobolev-equiv", "anisotropic Sobolev norm characterizations and embeddings"},
      {"quasimode", "kinetic-energy quasimodes and the b^-2 residual law"},
      {"oscillator-compare", "two-metric oscillator comparison and difference bound"},
      {"full", "union of all other suites"},
  };
}

namespace {

// ---- shared helpers -----------------------------------------------------

struct Ctx {
  const RunConfig& cfg;
  std::vector<CheckRecord> records;
  std::map<std::string, std::string> tables;

  void add(const std::string& suite, const std::string& id,
           std::map<std::string, double> params, double value, double bound, double margin,
           double drift, bool pass, const std::string& note = "") {
    CheckRecord r;
    r.suite = suite;
    r.check_id = id;
    r.params = std::move(params);
    r.value = value;
    r.bound = bound;
    r.margin = margin;
    r.drift = drift;
    r.status = pass ? CheckStatus::pass : CheckStatus::fail;
    r.note = note;
    records.push_back(std::move(r));
  }
};

// Order-preserving parallel map over cells; each cell writes its own slot, so
// scheduling cannot reorder or change results.
// TODO: route the localization state loops in run_partitions through this
// pool as well; they are the largest single-threaded block of the full run.
template <typename F>
void parallel_cells(int jobs, int count, F&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  const int workers = std::min(jobs, count);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

Vector probe_vector(uint64_t seed, uint64_t stream, long n) {
  CounterRng rng(seed, stream);
  Vector v = rng.complex_gaussian_vector(n);
  v.normalize();
  return v;
}

// ---- identities suite ----------------------------------------------------

void run_identities(Ctx& ctx) {
  const std::string S = "identities";
  const uint64_t seed = ctx.cfg.seed;
  const int N = std::max(4, ctx.cfg.N);
  const int d = std::max(1, std::min(2, ctx.cfg.d));
  HermiteBasis basis = HermiteBasis::make(d, N);
  const double tol = ctx.cfg.identity_tol;

  {  // number operator: exact diagonal ladder
    FiberOperator num = op_number(basis);
    double worst = 0;
    for (long i = 0; i < basis.dim(); ++i) {
      const auto modes = basis.unpack(i);
      double expect = d / 2.0;
      for (int m : modes) expect += m;
      worst = std::max(worst, std::abs(num.matrix(i, i) - Complex(expect, 0)));
    }
    const double offdiag = (num.matrix - Matrix(num.matrix.diagonal().asDiagonal())).norm();
    ctx.add(S, "number_spectrum_exact", {{"N", double(N)}, {"d", double(d)}},
            std::max(worst, offdiag), 0.0, -std::max(worst, offdiag), 0.0,
            worst == 0.0 && offdiag == 0.0);
  }
  {  // canonical commutation on the interior block, probed through the
     // tensor lift (the product only differs from the identity on the top
     // ladder rows)
    const Matrix D = op_deriv(basis, 0).matrix;
    const Matrix P = op_position(basis, 0).matrix;
    double worst = 0;
    for (int t = 0; t < 16; ++t) {
      Vector u = probe_vector(seed, 300 + t, basis.dim());
      for (long i = 0; i < basis.dim(); ++i)
        if (basis.unpack(i)[0] > N - 2) u(i) = 0;
      const Vector r = D * (P * u) - P * (D * u) - u;
      for (long i = 0; i < basis.dim(); ++i)
        if (basis.unpack(i)[0] <= N - 2) worst = std::max(worst, std::abs(r(i)));
    }
    ctx.add(S, "canonical_commutation_interior", {{"N", double(N)}}, worst, tol, tol - worst,
            0.0, worst < tol);
  }
  if (d >= 2) {  // position operators on different axes commute exactly
     // (tensor structure; checked as a matrix identity at a structural cutoff)
    HermiteBasis small = HermiteBasis::make(d, 10);
    const Matrix P0 = op_position(small, 0).matrix;
    const Matrix P1 = op_position(small, 1).matrix;
    const double v = (P0 * P1 - P1 * P0).norm();
    ctx.add(S, "position_axes_commute", {}, v, 0.0, -v, 0.0, v == 0.0);
  }

  if (d >= 2) {
    // oscillator split identity: (1+O)^2 - (1+O_1)^2 = (sum_{j>1} O_j)^2
    //                            + 2 (1+O_1) sum_{j>1} O_j, on probes
    Vector o_total(basis.dim()), o_1(basis.dim()), o_rest(basis.dim());
    for (long i = 0; i < basis.dim(); ++i) {
      const auto modes = basis.unpack(i);
      double rest = 0;
      for (int ax = 1; ax < d; ++ax) rest += modes[ax] + 0.5;
      o_1(i) = modes[0] + 0.5;
      o_rest(i) = rest;
      o_total(i) = std::real(o_1(i) + o_rest(i));
    }
    double worst = 0;
    for (int t = 0; t < 32; ++t) {
      const Vector u = probe_vector(seed, 100 + t, basis.dim());
      Vector lhs = (o_total.array() + 1.0).square().matrix().asDiagonal() * u;
      lhs -= (o_1.array() + 1.0).square().matrix().asDiagonal() * u;
      Vector rhs = o_rest.array().square().matrix().asDiagonal() * u;
      rhs += 2.0 * ((o_1.array() + 1.0) * o_rest.array()).matrix().asDiagonal() * u;
      worst = std::max(worst, (lhs - rhs).norm() / (1.0 + lhs.norm()));
    }
    ctx.add(S, "oscillator_split_identity", {{"N", double(N)}, {"d", double(d)}}, worst, tol,
            tol - worst, 0.0, worst < tol);

    // positivity identity for the rotated fiber, full truncated block
    const double xi_norm = std::sqrt(2.0), lambda = 0.7;
    const Matrix P1m = op_position(basis, 0).matrix;
    const Matrix eye = Matrix::Identity(basis.dim(), basis.dim());
    const Matrix A = eye + Matrix(o_total.asDiagonal()) +
                     Complex(0, 1) * (xi_norm * P1m - lambda * eye);
    const Matrix B = eye + Matrix(o_1.asDiagonal()) +
                     Complex(0, 1) * (xi_norm * P1m - lambda * eye);
    const Vector diag_gap =
        ((o_total.array() + 1.0).square() - (o_1.array() + 1.0).square()).matrix();
    double worst2 = 0;
    for (int t = 0; t < 32; ++t) {
      const Vector u = probe_vector(seed, 200 + t, basis.dim());
      const Vector l = A.adjoint() * (A * u);
      Vector r = B.adjoint() * (B * u);
      r += diag_gap.asDiagonal() * u;
      worst2 = std::max(worst2, (l - r).norm() / (1.0 + l.norm()));
    }
    ctx.add(S, "positivity_identity", {{"xi", xi_norm}, {"lambda", lambda}}, worst2, tol,
            tol - worst2, 0.0, worst2 < tol);
  }

  {  // flat vertical oscillator reduces to the ladder on the interior block
     // (structural, so a small cutoff suffices)
    const int Nv = 12;
    HermiteBasis vb = HermiteBasis::make(d, Nv);
    MetricField flat = MetricField::flat(d);
    FiberOperator osc = assemble_vertical(vb, flat, RealVector::Zero(d));
    const Matrix num = op_number(vb).matrix;
    double worst = 0;
    for (long i = 0; i < vb.dim(); ++i)
      for (long j = 0; j < vb.dim(); ++j) {
        const auto mi = vb.unpack(i), mj = vb.unpack(j);
        bool interior = true;
        for (int ax = 0; ax < d; ++ax)
          if (mi[ax] > Nv - 2 || mj[ax] > Nv - 2) interior = false;
        if (interior) worst = std::max(worst, std::abs(osc.matrix(i, j) - num(i, j)));
      }
    ctx.add(S, "vertical_flat_is_ladder", {}, worst, tol, tol - worst, 0.0, worst < tol);
  }

  {  // scale-reduction ratios on the lowest modes (h b = 1 pairs)
    HermiteBasis b1 = HermiteBasis::make(1, 32);
    auto lowest = [&](const Matrix& m, int count) {
      Eigen::ComplexEigenSolver<Matrix> es(m, false);
      std::vector<double> re(es.eigenvalues().size());
      for (long i = 0; i < es.eigenvalues().size(); ++i) re[i] = std::real(es.eigenvalues()(i));
      std::sort(re.begin(), re.end());
      re.resize(count);
      return re;
    };
    for (auto [bb, hh] : std::vector<std::pair<double, double>>{{4.0, 0.25}, {0.5, 2.0}}) {
      GkfpParams p;
      p.b = bb;
      p.h = hh;
      RealVector xi(1);
      xi(0) = 1.0;
      ScalingCertificate cert = scaling_reduce(bb, hh);
      FiberOperator direct = assemble_euclid_fiber(p, xi, {}, b1);
      GkfpParams unit;
      FiberOperator ref = assemble_euclid_fiber(unit, RealVector(cert.xi_scale * xi), {}, b1);
      const auto e1 = lowest(direct.matrix, 10);
      const auto e2 = lowest(ref.matrix, 10);
      double worst = 0;
      for (int i = 0; i < 10; ++i) worst = std::max(worst, std::abs(e1[i] - cert.spectral_ratio * e2[i]));
      ctx.add(S, "scale_reduction_ratio", {{"b", bb}, {"h", hh}, {"ratio", cert.spectral_ratio}},
              worst, 1e-8, 1e-8 - worst, 0.0, worst < 1e-8);
    }
  }

  {  // flat scaled operator block-diagonalizes into euclidean fibers
    MetricField flat1 = MetricField::flat(1);
    HermiteBasis hb = HermiteBasis::make(1, 12);
    QGrid qg{8, 2.0 * M_PI};
    GkfpParams pars;
    pars.b = 1.5;
    FiberOperator P = assemble_scaled(pars, 0, flat1, qg, PRep::make_hermite(hb));
    const RealVector qn = qg.nodes();
    double worst = 0;
    for (int k : {0, 1, 2, 3, -1, -2, -3}) {
      RealVector xi(1);
      xi(0) = qg.xi(k);
      GkfpParams ep = GkfpParams::from_ell(pars.b, 0);
      const Matrix fiber = assemble_euclid_fiber(ep, xi, {}, hb).matrix;
      Matrix emb = Matrix::Zero(P.dim(), hb.dim());
      for (int j = 0; j < qg.points; ++j)
        for (long n = 0; n < hb.dim(); ++n)
          emb(j * hb.dim() + n, n) = std::exp(Complex(0, xi(0) * qn(j))) / std::sqrt(8.0);
      worst = std::max(worst, (P.matrix * emb - emb * fiber).norm());
    }
    ctx.add(S, "fiber_block_diagonalization", {{"b", pars.b}}, worst, 1e-10, 1e-10 - worst, 0.0,
            worst < 1e-10);
  }
}

// ---- airy-scan suite -------------------------------------------------------

void run_airy(Ctx& ctx) {
  const std::string S = "airy-scan";
  const double fit_tol = ctx.cfg.fit_tol;

  {  // resolvent scaling fit in a cutoff-independent Hermite frame
    HermiteBasis b = HermiteBasis::make(1, 384);
    const Matrix D = op_deriv(b, 0).matrix;
    const Matrix half_lap = 0.5 * (D.transpose() * D);
    const Matrix P = op_position(b, 0).matrix;
    std::vector<double> xs = {4, 8, 16, 32, 64, 128, 256};
    std::vector<double> ys(xs.size());
    parallel_cells(ctx.cfg.jobs, static_cast<int>(xs.size()), [&](int i) {
      FiberOperator op;
      op.rep = RepInfo::hermite(b);
      op.matrix = Complex(0, xs[i]) * P + half_lap;
      ys[i] = resolvent_norm(op, Complex(0, 0));
    });
    FitResult f = exponent_fit(xs, ys);
    ctx.add(S, "airy_resolvent_exponent", {{"N", 384.0}}, f.slope, -2.0 / 3.0,
            fit_tol - std::abs(f.slope + 2.0 / 3.0), f.stderr_,
            std::abs(f.slope + 2.0 / 3.0) < fit_tol);
  }
  {  // exact unitary-scaling relation on commensurate grids
    const int M = std::max(128, ctx.cfg.M);
    const double base =
        resolvent_norm(op_airy_grid(PGrid::make(12.0, M), 1.0, 0.0), Complex(0, 0));
    double worst = 0;
    for (double xi : {4.0, 64.0, 256.0}) {
      PGrid g = PGrid::make(12.0 * std::pow(xi, -1.0 / 3.0), M);
      const double rn = resolvent_norm(op_airy_grid(g, xi, 0.0), Complex(0, 0));
      worst = std::max(worst, std::abs(rn - std::pow(xi, -2.0 / 3.0) * base) / rn);
    }
    ctx.add(S, "airy_resolvent_exact_scaling", {{"M", double(M)}}, worst, 1e-6, 1e-6 - worst,
            0.0, worst < 1e-6);
  }
  {  // four-term bound across the (xi, lambda) sweep, drift under doubling
    std::vector<std::pair<double, double>> cells;
    for (double xi : {1.0, 4.0, 16.0, 64.0})
      for (double lambda : ctx.cfg.lambda_sweep) {
        cells.push_back({xi, lambda});
        if (lambda != 0.0) cells.push_back({xi, -lambda});
      }
    const int M_base = 384;
    std::vector<double> c_base(cells.size());
    std::vector<bool> window_ok(cells.size(), true);
    parallel_cells(ctx.cfg.jobs, static_cast<int>(cells.size()), [&](int i) {
      EstimateReport rep = airy_bound(cells[i].first, cells[i].second,
                                      airy_window(cells[i].first, cells[i].second, M_base));
      c_base[i] = rep.empirical_constant;
      window_ok[i] = rep.pass;
    });
    size_t sup_idx = 0;
    for (size_t i = 0; i < cells.size(); ++i)
      if (c_base[i] > c_base[sup_idx]) sup_idx = i;
    // recompute the sup cell (and the runners-up) at doubled resolution
    std::vector<size_t> order(cells.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return c_base[a] > c_base[b]; });
    double sup2 = 0;
    const int recheck = std::min<size_t>(4, order.size());
    for (int i = 0; i < recheck; ++i) {
      const auto& cell = cells[order[i]];
      EstimateReport rep =
          airy_bound(cell.first, cell.second, airy_window(cell.first, cell.second, 2 * M_base));
      sup2 = std::max(sup2, rep.empirical_constant);
    }
    const double sup1 = c_base[sup_idx];
    const double drift = std::abs(sup2 - sup1) / sup1;
    bool all_windows = true;
    for (bool ok : window_ok) all_windows = all_windows && ok;
    for (size_t i = 0; i < cells.size(); ++i)
      ctx.add(S, "airy_bound_cell", {{"xi", cells[i].first}, {"lambda", cells[i].second}},
              c_base[i], 0.0, c_base[i], 0.0, std::isfinite(c_base[i]) && window_ok[i]);
    ctx.add(S, "airy_bound_sup_drift",
            {{"sup", sup1}, {"sup_doubled", sup2}, {"M", double(M_base)}}, drift,
            ctx.cfg.drift_tol, ctx.cfg.drift_tol - drift, drift,
            drift < ctx.cfg.drift_tol && all_windows);
  }
  {  // free case C0 <= 3
    EstimateReport rep = airy_bound(0.0, 0.0, PGrid::make(12.0, 256));
    ctx.add(S, "airy_bound_free_case", {}, rep.empirical_constant, 3.0,
            3.0 - rep.empirical_constant, 0.0, rep.empirical_constant <= 3.0);
  }
}

// ---- euclid-verify suite ---------------------------------------------------

void run_euclid(Ctx& ctx) {
  const std::string S = "euclid-verify";

  {  // fiber spectra against the completion of the square
    for (double xi : ctx.cfg.xi_sweep) {
      const int n_report = 33;
      double worst = 0;
      bool ok = true;
      int cutoff = 0;
      try {
        cutoff = fiber_cutoff_for(xi, n_report);
        const auto eig = fiber_spectrum_accurate(xi, n_report, cutoff);
        for (int n = 0; n < n_report; ++n)
          worst = std::max(worst, std::abs(eig[n] - (n + 0.5 + xi * xi / 2.0)));
      } catch (const std::exception&) {
        ok = false;
        worst = 1e300;
      }
      ctx.add(S, "fiber_spectrum", {{"xi", xi}, {"cutoff", double(cutoff)}}, worst, 1e-6,
              1e-6 - worst, 0.0, ok && worst < 1e-6);
    }
  }
  {  // subelliptic constant at b = h = 1: finite, sweep-stable, rescale-invariant
    HermiteBasis b = HermiteBasis::make(1, 48);
    HermiteBasis b2 = HermiteBasis::make(1, 96);
    double sup1 = 0, sup2 = 0;
    std::vector<std::pair<double, double>> cells;
    for (double xi : ctx.cfg.xi_sweep)
      for (double lambda : ctx.cfg.lambda_sweep) {
        cells.push_back({xi, lambda});
        if (lambda != 0) cells.push_back({xi, -lambda});
      }
    std::vector<double> v1(cells.size()), v2(cells.size());
    parallel_cells(ctx.cfg.jobs, static_cast<int>(cells.size()), [&](int i) {
      RealVector xi(1);
      xi(0) = cells[i].first;
      v1[i] = euclid_bound(1.0, 1.0, xi, cells[i].second, b).empirical_constant;
      v2[i] = euclid_bound(1.0, 1.0, xi, cells[i].second, b2).empirical_constant;
    });
    for (size_t i = 0; i < cells.size(); ++i) {
      sup1 = std::max(sup1, v1[i]);
      sup2 = std::max(sup2, v2[i]);
      ctx.add(S, "euclid_bound_cell", {{"xi", cells[i].first}, {"lambda", cells[i].second}},
              v1[i], 0.0, v1[i], 0.0, std::isfinite(v1[i]));
    }
    const double drift = std::abs(sup2 - sup1) / sup1;
    ctx.add(S, "euclid_bound_sup_drift", {{"sup", sup1}, {"sup_doubled", sup2}}, drift,
            ctx.cfg.drift_tol, ctx.cfg.drift_tol - drift, drift, drift < ctx.cfg.drift_tol);

    RealVector xi(1);
    xi(0) = 1.0;
    const double lambda = 2.0;
    const double base = euclid_bound(1.0, 1.0, xi, lambda, b).empirical_constant;
    for (auto [bb, hh] : std::vector<std::pair<double, double>>{{4.0, 0.25}, {0.5, 2.0}}) {
      RealVector xis = std::sqrt(hh / bb) * xi;
      const double c = euclid_bound(bb, hh, xis, lambda / bb, b).empirical_constant;
      const double rel = std::abs(c - base) / base;
      ctx.add(S, "euclid_bound_rescale", {{"b", bb}, {"h", hh}}, rel, 0.01, 0.01 - rel, 0.0,
              rel < 0.01);
    }
  }
  {  // accretivity floor of the scalar integration by parts, flat fiber and
     // perturbed q-grid representation; locate the smallest admissible C0
    MetricField pert = MetricField::from_preset(ctx.cfg.metric.rfind("sin1d", 0) == 0
                                                    ? ctx.cfg.metric
                                                    : std::string("sin1d:0.1"));
    HermiteBasis hb = HermiteBasis::make(1, 32);
    QGrid qg{12, 2.0 * M_PI};
    const std::vector<double> c_grid = {0.0, 0.25, 0.5, 1, 2, 4, 8, 16, 32};
    double located = -1;
    for (double C0 : c_grid) {
      bool all_ok = true;
      for (double bb : ctx.cfg.b_sweep) {
        const double kappa = C0 * (1.0 + bb * bb);
        FiberOperator P = assemble_scaled(GkfpParams{bb}, 0, pert, qg, PRep::make_hermite(hb));
        const Matrix osc = assemble_scaled_oscillator(0, pert, qg, PRep::make_hermite(hb)).matrix;
        Matrix herm = 0.5 * (P.matrix + P.matrix.adjoint());
        herm += (kappa / (bb * bb)) * Matrix::Identity(P.dim(), P.dim());
        Matrix floor_diff = herm - (osc + kappa * Matrix::Identity(P.dim(), P.dim())) / (4.0 * bb * bb);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (floor_diff + floor_diff.adjoint()),
                                                 Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10) all_ok = false;
      }
      if (all_ok) {
        located = C0;
        break;
      }
    }
    ctx.add(S, "accretivity_floor_c0", {{"located_C0", located}}, located, 32.0, 32.0 - located,
            0.0, located >= 0.0);
  }
  {  // b-growth trend of the subelliptic constant (reported, no target)
    HermiteBasis b = HermiteBasis::make(1, 48);
    std::vector<double> bs = {1, 2, 4, 8}, cs;
    for (double bb : bs) {
      RealVector xi(1);
      xi(0) = 1.0;
      cs.push_back(euclid_bound(bb, 1.0, xi, 0.0, b).empirical_constant);
    }
    FitResult f = exponent_fit(bs, cs);
    ctx.add(S, "subelliptic_constant_b_growth", {{"exponent", f.slope}}, f.slope, 0.0, 0.0,
            f.stderr_, true, "reported trend; no asserted target");
  }
  {  // weighted resolvent product along the imaginary axis
    HermiteBasis b = HermiteBasis::make(1, 96);
    const Matrix D = op_deriv(b, 0).matrix;
    const Matrix P = op_position(b, 0).matrix;
    const Matrix osc = -0.5 * (D * D) + 0.5 * (P * P);
    std::vector<double> lambdas = {8, 32, 128, 512}, products(lambdas.size());
    parallel_cells(ctx.cfg.jobs, static_cast<int>(lambdas.size()), [&](int li) {
      const double lambda = lambdas[li];
      double best = 0;
      for (double factor : {0.125, 0.25, 0.5, 1.0, 2.0}) {
        FiberOperator op;
        op.rep = RepInfo::hermite(b);
        op.matrix = osc + Complex(0, lambda * factor) * P;
        const double p0 = 1.0 / factor;
        const double weight =
            std::pow(lambda, 2.0 / 3.0) / std::pow(1.0 + p0 * p0, 1.0 / 3.0);
        best = std::max(best, resolvent_norm(op, Complex(0, lambda)) * weight);
      }
      products[li] = best;
    });
    FitResult f = exponent_fit(lambdas, products);
    ctx.add(S, "weighted_resolvent_product_flat", {{"slope", f.slope}}, std::abs(f.slope), 0.15,
            0.15 - std::abs(f.slope), f.stderr_, std::abs(f.slope) < 0.15);
  }
}

// ---- partition-check suite ---------------------------------------------

Vector dyadic_member_qp(const DyadicPartition& part, int ell, const MetricField& m,
                        const QGrid& qg, const PGrid& pg) {
  const RealVector qn = qg.nodes();
  const RealVector pn = pg.nodes();
  Vector v(qg.points * pg.points);
  for (int qi = 0; qi < qg.points; ++qi) {
    RealVector q(1);
    q(0) = qn(qi);
    const double w = m.ginv(q)(0, 0);
    for (int k = 0; k < pg.points; ++k) v(qi * pg.points + k) = part.member(ell, w * pn(k) * pn(k));
  }
  return v;
}

Vector grid_member_qh(const GridPartition& part, int m, const QGrid& qg, int p_dim) {
  const RealVector qn = qg.nodes();
  Vector v(qg.points * p_dim);
  for (int qi = 0; qi < qg.points; ++qi) {
    double val = 0;
    for (int img = -1; img <= 1; ++img) val += part.member(m, qn(qi) + img * qg.length);
    for (int n = 0; n < p_dim; ++n) v(qi * p_dim + n) = val;
  }
  return v;
}

void run_partitions(Ctx& ctx) {
  const std::string S = "partition-check";
  const uint64_t seed = ctx.cfg.seed;
  const double tol = ctx.cfg.identity_tol;
  DyadicPartition dyadic = build_dyadic();

  {  // dyadic identity at 1e4 points
    CounterRng rng(seed, 11);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
      const double t = std::pow(2.0, -10.0 + (std::log2(dyadic.t_max) + 10.0) * rng.uniform());
      worst = std::max(worst, std::abs(dyadic.identity_sum(t * t) - 1.0));
    }
    ctx.add(S, "dyadic_identity", {{"points", 10000}}, worst, tol, tol - worst, 0.0, worst < tol);
  }
  {  // bottom member plateau
    double worst = 0;
    for (double p : {0.0, 0.2, 0.5}) worst = std::max(worst, std::abs(dyadic.member(-1, p * p) - 1.0));
    ctx.add(S, "dyadic_bottom_plateau", {}, worst, 0.0, -worst, 0.0, worst == 0.0);
  }
  {  // grid identity at 1e4 points
    GridPartition gp = build_grid(1.0, 0);
    CounterRng rng(seed, 12);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
      const double q = -50.0 + 100.0 * rng.uniform();
      worst = std::max(worst, std::abs(gp.identity_sum(q) - 1.0));
    }
    ctx.add(S, "grid_identity", {{"points", 10000}}, worst, tol, tol - worst, 0.0, worst < tol);
  }
  {  // transport annihilates dyadic members (analytic chain rule)
    MetricField m = MetricField::from_preset("sin1d:0.1");
    CounterRng rng(seed, 13);
    double worst = 0;
    for (int trial = 0; trial < 500; ++trial) {
      RealVector q(1), p(1);
      q(0) = 2.0 * M_PI * rng.uniform();
      p(0) = -4.0 + 8.0 * rng.uniform();
      const double w = m.ginv(q)(0, 0);
      const double gamma = christoffel(m, q)[0](0, 0);
      const double dginv = -m.dg(q)[0](0, 0) * w * w;
      for (int ell : {-1, 0, 1}) {
        const double dth = dyadic.member_d1(ell, w * p(0) * p(0));
        const double val =
            w * p(0) * dth * (dginv * p(0) * p(0) + gamma * p(0) * 2.0 * w * p(0));
        worst = std::max(worst, std::abs(val));
      }
    }
    ctx.add(S, "transport_kills_dyadic", {}, worst, 1e-10, 1e-10 - worst, 0.0, worst < 1e-10);
  }
  {  // scaled derivative sup of the grid members is (m, ell, A)-independent
    auto scaled_sup = [](double A, int ell, int m) {
      GridPartition p = build_grid(A, ell);
      double sup = 0;
      for (int i = 0; i <= 1000; ++i) {
        const double x = -1.0 + 2.0 * i / 1000.0;
        sup = std::max(sup, std::abs(p.scale() * p.member_dq(m, p.scale() * (m + x))));
      }
      return sup;
    };
    const double ref = scaled_sup(1.0, 0, 0);
    double worst = 0;
    worst = std::max(worst, std::abs(scaled_sup(2.0, 0, 1) - ref));
    worst = std::max(worst, std::abs(scaled_sup(0.5, 2, -3) - ref));
    worst = std::max(worst, std::abs(scaled_sup(8.0, 3, 5) - ref));
    ctx.add(S, "grid_scaled_derivative_invariance", {{"C1", ref}}, worst, 1e-10, 1e-10 - worst,
            0.0, worst < 1e-10);
  }
  {  // commutator identities at stencil order (loop-evaluated at high res)
    auto smooth_fn = [](double p) {
      return std::exp(-0.18 * p * p) * Complex(std::cos(1.3 * p), std::sin(0.7 * p));
    };
    auto first_rel = [&](int M) {
      const double P = 6.0, s = 2.0 * P / M;
      double err2 = 0, lhs2 = 0;
      for (int k = 1; k + 1 < M; ++k) {
        const double p = -P + k * s;
        auto th = [&](double pp) { return dyadic.member(0, pp * pp); };
        const Complex lhs = -0.5 / (s * s) *
                            ((th(p + s) - th(p)) * smooth_fn(p + s) +
                             (th(p - s) - th(p)) * smooth_fn(p - s));
        const double sq = p * p;
        const double dth = dyadic.member_d1(0, sq) * 2.0 * p;
        const double d2th = dyadic.member_d2(0, sq) * 4.0 * sq + dyadic.member_d1(0, sq) * 2.0;
        const Complex du = (smooth_fn(p + s) - smooth_fn(p - s)) / (2.0 * s);
        err2 += std::norm(lhs - (-dth * du - 0.5 * d2th * smooth_fn(p)));
        lhs2 += std::norm(lhs);
      }
      return std::sqrt(err2 / lhs2);
    };
    const double ratio1 = first_rel(8192) / first_rel(16384);
    ctx.add(S, "first_commutator_stencil_order", {{"ratio", ratio1}}, ratio1, 4.0,
            std::min(ratio1 - 3.4, 4.6 - ratio1), 0.0, ratio1 > 3.4 && ratio1 < 4.6);

    auto second_rel = [&](int M) {
      const double P = 6.0, s = 2.0 * P / M;
      auto t0 = [&](double pp) { return dyadic.member(0, pp * pp); };
      auto t1 = [&](double pp) { return dyadic.member(1, pp * pp); };
      double err2 = 0, ref2 = 0;
      for (int k = 1; k + 1 < M; ++k) {
        const double p = -P + k * s;
        const Complex lhs = -0.5 / (s * s) *
                            ((t0(p + s) - t0(p)) * (t1(p + s) - t1(p)) * smooth_fn(p + s) +
                             (t0(p - s) - t0(p)) * (t1(p - s) - t1(p)) * smooth_fn(p - s));
        const double sq = p * p;
        const Complex rhs = -(dyadic.member_d1(0, sq) * 2.0 * p) *
                            (dyadic.member_d1(1, sq) * 2.0 * p) * smooth_fn(p);
        err2 += std::norm(lhs - rhs);
        ref2 += std::norm(rhs);
      }
      return std::sqrt(err2 / std::max(ref2, 1e-300));
    };
    const double ratio2 = second_rel(8192) / second_rel(16384);
    ctx.add(S, "second_commutator_stencil_order", {{"ratio", ratio2}}, ratio2, 4.0,
            std::min(ratio2 - 3.4, 4.6 - ratio2), 0.0, ratio2 > 3.4 && ratio2 < 4.6);
  }
  {  // q-grid commutator equals its multiplier form at stencil order; the
     // multiplier form then commutes with a second member exactly
    MetricField flat = MetricField::flat(1);
    HermiteBasis hb = HermiteBasis::make(1, 10);
    GridPartition gp = build_grid(2.0 * M_PI, 0);
    auto err_at = [&](int Mq) {
      QGrid qg{Mq, 4.0 * M_PI};
      GkfpParams pars;
      pars.b = 2.0;
      FiberOperator P = assemble_scaled(pars, 0, flat, qg, PRep::make_hermite(hb), QDeriv::fd2);
      const Vector psi = grid_member_qh(gp, 0, qg, hb.cutoff);
      const RealVector qn = qg.nodes();
      const Matrix pmat = op_position(hb, 0).matrix;
      Vector c = Vector::Zero(P.dim());
      for (int qi = 0; qi < Mq; ++qi)
        for (int n = 0; n < 6; ++n)
          c(qi * hb.cutoff + n) = Complex(std::cos(2.0 * qn(qi) + n), std::sin(qn(qi) - n)) / (1.0 + n);
      c /= c.norm();
      const Vector lhs = commutator_apply(P, psi, c);
      Vector rhs = Vector::Zero(P.dim());
      for (int qi = 0; qi < Mq; ++qi) {
        double dpsi = 0;
        for (int img = -1; img <= 1; ++img) dpsi += gp.member_dq(0, qn(qi) + img * qg.length);
        rhs.segment(qi * hb.cutoff, hb.cutoff) =
            (dpsi / pars.b) * (pmat * c.segment(qi * hb.cutoff, hb.cutoff));
      }
      return (lhs - rhs).norm();
    };
    const double ratio = err_at(32) / err_at(64);
    ctx.add(S, "grid_commutator_multiplier_form", {{"ratio", ratio}}, ratio, 4.0,
            std::min(ratio - 3.0, 5.5 - ratio), 0.0, ratio > 3.0 && ratio < 5.5);

    QGrid qg{16, 4.0 * M_PI};
    const Vector psi2 = grid_member_qh(gp, 1, qg, hb.cutoff);
    const RealVector qn = qg.nodes();
    Matrix mult = Matrix::Zero(qg.points * hb.cutoff, qg.points * hb.cutoff);
    const Matrix pmat = op_position(hb, 0).matrix;
    for (int qi = 0; qi < qg.points; ++qi) {
      double dpsi = 0;
      for (int img = -1; img <= 1; ++img) dpsi += gp.member_dq(0, qn(qi) + img * qg.length);
      mult.block(qi * hb.cutoff, qi * hb.cutoff, hb.cutoff, hb.cutoff) = dpsi * pmat;
    }
    FiberOperator mform;
    mform.rep.dim = mult.rows();
    mform.matrix = mult;
    const double dbl = commutator(mform, psi2).matrix.cwiseAbs().maxCoeff();
    ctx.add(S, "grid_double_commutator_zero", {}, dbl, tol, tol - dbl, 0.0, dbl < tol);
  }
  {  // localization inequalities for O and for P_{b,0}, 100 random states
    PGrid pg = PGrid::make(10.0, 160, PGrid::Boundary::dirichlet);
    FiberOperator O = assemble_scaled_oscillator(0, MetricField::flat(1), QGrid{1, 2 * M_PI},
                                                 PRep::make_grid(pg));
    std::vector<Vector> fam;
    const RealVector pn = pg.nodes();
    for (int ell = -1; ell <= 4; ++ell) {
      Vector v(pg.points);
      for (int k = 0; k < pg.points; ++k) v(k) = dyadic.member(ell, pn(k) * pn(k));
      fam.push_back(v);
    }
    HermiteBasis hb = HermiteBasis::make(1, 48);
    std::vector<Vector> states;
    for (int i = 0; i < 100; ++i) {
      CounterRng rng(seed, 3000 + i);
      Vector c = Vector::Zero(hb.cutoff);
      for (int n = 0; n < 32; ++n) c(n) = Complex(rng.gaussian(), rng.gaussian());
      Vector s = to_grid(c, hb, pg);
      states.push_back(s / s.norm());
    }
    const auto reports = localization_bounds(O, fam, states, 0.05);
    int fails = 0;
    double worst_r = 0;
    for (const auto& rep : reports) {
      if (!rep.upper_ok || !rep.lower_ok) ++fails;
      worst_r = std::max(worst_r, rep.r);
    }
    ctx.add(S, "localization_oscillator", {{"states", 100.0}, {"worst_r", worst_r}},
            double(fails), 0.0, -double(fails), 0.0, fails == 0);

    MetricField flat = MetricField::flat(1);
    QGrid qg{10, 2.0 * M_PI};
    PGrid pg2 = PGrid::make(10.0, 120, PGrid::Boundary::dirichlet);
    GkfpParams pars;
    pars.b = 1.0;
    FiberOperator P = assemble_scaled(pars, 0, flat, qg, PRep::make_grid(pg2));
    std::vector<Vector> fam2;
    for (int ell = -1; ell <= 4; ++ell) fam2.push_back(dyadic_member_qp(dyadic, ell, flat, qg, pg2));
    HermiteBasis hb2 = HermiteBasis::make(1, 40);
    std::vector<Vector> states2;
    for (int i = 0; i < 100; ++i) {
      CounterRng rng(seed, 4000 + i);
      Vector u = Vector::Zero(qg.points * pg2.points);
      for (int qi = 0; qi < qg.points; ++qi) {
        Vector c = Vector::Zero(hb2.cutoff);
        for (int n = 0; n < 24; ++n) c(n) = Complex(rng.gaussian(), rng.gaussian());
        Vector s = to_grid(c, hb2, pg2);
        u.segment(qi * pg2.points, pg2.points) =
            std::exp(Complex(0, 2.0 * M_PI * rng.uniform())) * s / s.norm();
      }
      states2.push_back(u / u.norm());
    }
    const auto reports2 = localization_bounds(P, fam2, states2, 0.05);
    int fails2 = 0;
    for (const auto& rep : reports2)
      if (!rep.upper_ok || !rep.lower_ok) ++fails2;
    ctx.add(S, "localization_gkfp", {{"states", 100.0}, {"b", pars.b}}, double(fails2), 0.0,
            -double(fails2), 0.0, fails2 == 0);

    // dyadic operator equivalence with located kappa over the b sweep
    const std::vector<double> C_grid = {0.0625, 0.125, 0.25, 0.5, 1, 2, 4, 8, 16, 32, 64};
    // adversarial ground state plus the random states
    Vector ground = Vector::Zero(hb2.cutoff);
    ground(0) = 1.0;
    const Vector slice = to_grid(ground, hb2, pg2);
    Vector gstate = Vector::Zero(qg.points * pg2.points);
    for (int qi = 0; qi < qg.points; ++qi) gstate.segment(qi * pg2.points, pg2.points) = slice;
    gstate /= gstate.norm();
    std::vector<Vector> eq_states(states2.begin(), states2.begin() + 49);
    eq_states.push_back(gstate);
    double kappa_min = 1e300, kappa_max = 0;
    for (double bb : ctx.cfg.b_sweep) {
      GkfpParams pb;
      pb.b = bb;
      FiberOperator Pb = assemble_scaled(pb, 0, flat, qg, PRep::make_grid(pg2));
      DyadicEquivalenceReport rep = dyadic_equivalence(Pb, fam2, eq_states, bb, 0.0, C_grid);
      kappa_min = std::min(kappa_min, rep.kappa_b);
      kappa_max = std::max(kappa_max, rep.kappa_b);
      ctx.add(S, "dyadic_equivalence", {{"b", bb}, {"C", rep.C}, {"kappa_b", rep.kappa_b}},
              std::min(rep.lower_margin, rep.upper_margin), 0.0,
              std::min(rep.lower_margin, rep.upper_margin), 0.0, rep.ok);
    }
    // Sweep self-consistency: the located shift is set by the same commutator
    // scale at every b here, so the kappa values agree within one grid notch
    // (the C = kappa/(1+b^2) parametrization then decreases with b).
    const double kappa_ratio = kappa_max / std::max(kappa_min, 1e-300);
    ctx.add(S, "dyadic_equivalence_kappa_consistency", {{"ratio", kappa_ratio}}, kappa_ratio,
            2.0, 2.0 - kappa_ratio, 0.0, kappa_ratio <= 2.0);
  }
  {  // grid partition error control and the A^-2 law
    MetricField flat = MetricField::flat(1);
    HermiteBasis hb = HermiteBasis::make(1, 16);
    QGrid qg{128, 32.0};
    GkfpParams pars;
    pars.b = 1.0;
    FiberOperator P = assemble_scaled(pars, 0, flat, qg, PRep::make_hermite(hb));
    Vector u = Vector::Zero(P.dim());
    const RealVector qn = qg.nodes();
    for (int qi = 0; qi < qg.points; ++qi)
      for (int n = 0; n < 8; ++n)
        u(qi * hb.cutoff + n) = Complex(std::cos((2 * M_PI / 32.0) * 3 * qn(qi) + 0.2 * n),
                                        std::sin((2 * M_PI / 32.0) * 2 * qn(qi) - n)) /
                                (1.0 + n * n);
    u /= u.norm();
    std::vector<double> As = ctx.cfg.A_sweep, errs;
    bool ineq_ok = true;
    for (double A : As) {
      GridPartition gp = build_grid(A, 0);
      const int count = static_cast<int>(std::lround(32.0 / A));
      std::vector<Vector> fam;
      for (int m = 0; m < count; ++m) fam.push_back(grid_member_qh(gp, m, qg, hb.cutoff));
      GridErrorReport rep = grid_error_bound(P, fam, u, 2.0, pars.b, 0.7, 0, A);
      if (!rep.lower_ok || !rep.upper_ok) ineq_ok = false;
      errs.push_back(rep.error_term);
      ctx.add(S, "grid_error_cell", {{"A", A}, {"C_gpsi", rep.C_gpsi}}, rep.error_term, 0.0,
              0.0, 0.0, rep.lower_ok && rep.upper_ok);
    }
    FitResult f = exponent_fit(As, errs);
    ctx.add(S, "grid_error_exponent", {{"slope", f.slope}}, f.slope, -2.0,
            0.1 - std::abs(f.slope + 2.0), f.stderr_, std::abs(f.slope + 2.0) < 0.1 && ineq_ok);
  }
  {  // partition table export
    std::string csv = "t,theta_tilde_sq";
    for (int ell = 0; ell <= 4; ++ell) csv += ",theta_" + std::to_string(ell) + "_sq";
    csv += ",sum\n";
    for (int i = 0; i <= 200; ++i) {
      const double t = std::pow(2.0, -3.0 + 8.0 * i / 200.0);
      const double s = t * t;
      csv += format_double(t);
      double sum = 0;
      const double bot = dyadic.member(-1, s);
      sum += bot * bot;
      csv += "," + format_double(bot * bot);
      for (int ell = 0; ell <= 4; ++ell) {
        const double v = dyadic.member(ell, s);
        sum += v * v;
        csv += "," + format_double(v * v);
      }
      for (int ell = 5; ell <= dyadic.ell_max; ++ell) {
        const double v = dyadic.member(ell, s);
        sum += v * v;
      }
      csv += "," + format_double(sum) + "\n";
    }
    ctx.tables["partition_dyadic.csv"] = csv;
  }
}

// ---- metric-cert suite ---------------------------------------------------

void run_metric_cert(Ctx& ctx) {
  const std::string S = "metric-cert";
  const uint64_t seed = ctx.cfg.seed;

  auto random_point = [](CounterRng& rng, int d, double scale) {
    PhasePoint X;
    X.q = scale * rng.gaussian_vector(d);
    X.p = scale * rng.gaussian_vector(d);
    X.xi = scale * rng.gaussian_vector(d);
    X.eta = scale * rng.gaussian_vector(d);
    return X;
  };

  {  // slowness at R = 2^12 on 1e5 premise-satisfying pairs
    CounterRng rng(seed, 21);
    const double R = 4096.0;
    int failures = 0, tested = 0;
    for (int i = 0; i < 100000; ++i) {
      PhasePoint X = random_point(rng, 1, std::pow(10.0, 2.0 * rng.uniform()));
      PhasePoint D = random_point(rng, 1, 1.0);
      const double norm = std::sqrt(gpsi_form(X, D));
      const double c = (0.999 * rng.uniform()) / (R * std::max(norm, 1e-300));
      PhasePoint Xp = X;
      Xp.q += c * D.q;
      Xp.p += c * D.p;
      Xp.xi += c * D.xi;
      Xp.eta += c * D.eta;
      SlownessResult res = slowness_check(X, Xp, R);
      if (res.premise) {
        ++tested;
        if (!res.pass) ++failures;
      }
    }
    ctx.add(S, "slowness", {{"R", R}, {"tested", double(tested)}}, double(failures), 0.0,
            -double(failures), 0.0, failures == 0 && tested > 90000);
  }
  {  // temperance on 1e5 random pairs
    CounterRng rng(seed, 22);
    int failures = 0;
    for (int i = 0; i < 100000; ++i) {
      PhasePoint X = random_point(rng, 1, 10.0);
      PhasePoint Xp = random_point(rng, 1, 10.0);
      if (!temperance_check(X, Xp).pass) ++failures;
    }
    ctx.add(S, "temperance", {{"pairs", 100000.0}}, double(failures), 0.0, -double(failures),
            0.0, failures == 0);
  }
  {  // dual metric identity on samples
    CounterRng rng(seed, 23);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      PhasePoint X = random_point(rng, 2, 3.0);
      PhasePoint T = random_point(rng, 2, 1.0);
      const double psi = psi_weight(X);
      const double dual = T.xi.squaredNorm() + psi * psi * T.q.squaredNorm() +
                          psi * (T.p.squaredNorm() + T.eta.squaredNorm());
      worst = std::max(worst, std::abs(dual - psi * psi * gpsi_form(X, T)) /
                                  (psi * psi * gpsi_form(X, T)));
    }
    ctx.add(S, "dual_metric_identity", {}, worst, 1e-12, 1e-12 - worst, 0.0, worst < 1e-12);
  }
  {  // christoffel oracle on the conformal 1D metric
    const double eps = 0.2;
    MetricField m = MetricField::expphi1d(eps);
    double worst = 0;
    for (double q0 : {-1.3, 0.0, 0.9, 2.5}) {
      RealVector q(1);
      q(0) = q0;
      worst = std::max(worst, std::abs(christoffel(m, q)[0](0, 0) - eps * std::cos(q0)));
    }
    ctx.add(S, "christoffel_conformal_oracle", {{"eps", eps}}, worst, 1e-12, 1e-12 - worst, 0.0,
            worst < 1e-12);
  }
  {  // inverse-metric derivative identity at sampled points
    MetricField m = MetricField::torus2d(0.12);
    CounterRng rng(seed, 24);
    const double h = 1e-6;
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
      RealVector q = rng.gaussian_vector(2);
      const auto gamma = christoffel(m, q);
      const RealMatrix gi = m.ginv(q);
      for (int j = 0; j < 2; ++j) {
        double fd_sum = 0, formula = 0;
        for (int i = 0; i < 2; ++i) {
          RealVector qp = q, qm = q;
          qp(i) += h;
          qm(i) -= h;
          fd_sum += (m.ginv(qp)(i, j) - m.ginv(qm)(i, j)) / (2.0 * h);
          for (int k = 0; k < 2; ++k)
            formula += -gamma[i](i, k) * gi(k, j) - gamma[j](i, k) * gi(i, k);
        }
        worst = std::max(worst, std::abs(fd_sum - formula));
      }
    }
    ctx.add(S, "inverse_metric_derivative_identity", {}, worst, 1e-6, 1e-6 - worst, 0.0,
            worst < 1e-6);
  }
  {  // chart certificates
    MetricField m1 = MetricField::from_preset("sin1d:0.1");
    RealVector q0(1);
    q0(0) = 0.0;
    NormalChart ch1 = normal_chart(m1, q0, 1.5);
    ChartCertificate c1 = certify_chart(ch1);
    ctx.add(S, "normal_chart_1d",
            {{"gdef", c1.origin_metric_defect}, {"dgdef", c1.origin_dmetric_defect}},
            std::max(c1.origin_metric_defect, c1.origin_dmetric_defect), 1e-8,
            1e-8 - std::max(c1.origin_metric_defect, c1.origin_dmetric_defect), 0.0,
            c1.origin_metric_defect < 1e-8 && c1.origin_dmetric_defect < 1e-8);

    MetricField m2 = MetricField::torus2d(0.1);
    RealVector q2(2);
    q2 << 0.3, 0.7;
    NormalChart ch2 = normal_chart(m2, q2, 0.5);
    ChartCertificate c2a = certify_chart(ch2, 7);
    ChartCertificate c2b = certify_chart(ch2, 13);
    const double stab = std::abs(c2b.metric_error_constant - c2a.metric_error_constant) /
                        c2b.metric_error_constant;
    ctx.add(S, "normal_chart_2d",
            {{"gdef", c2a.origin_metric_defect}, {"C", c2a.metric_error_constant},
             {"Cprime", c2a.christoffel_constant}},
            std::max(c2a.origin_metric_defect, c2a.origin_dmetric_defect), 1e-8,
            1e-8 - std::max(c2a.origin_metric_defect, c2a.origin_dmetric_defect), stab,
            c2a.origin_metric_defect < 1e-8 && c2a.origin_dmetric_defect < 1e-8 && stab < 0.05);
  }
  {  // scaled transport coefficients: flat zero, A-linearity, ell-stability
    MetricField flat = MetricField::flat(1);
    RealVector q0(1);
    q0(0) = 0.0;
    NormalChart chf = normal_chart(flat, q0, 40.0);
    const double flat_sup = scaled_coeffs(chf, 0, 2.0).sup_bound;
    ctx.add(S, "scaled_coeffs_flat_zero", {}, flat_sup, 0.0, -flat_sup, 0.0, flat_sup == 0.0);

    MetricField m2 = MetricField::torus2d(0.1);
    RealVector qc(2);
    qc << 0.0, M_PI / 2;
    NormalChart lc = linear_chart(m2, qc, 16.0);
    ScaledCoeffs s1 = scaled_coeffs(lc, 2, 1.0, 1.0, 33);
    ScaledCoeffs s2 = scaled_coeffs(lc, 2, 2.0, 1.0, 33);
    const double ratio_a = s2.sup_bound / s1.sup_bound;
    ctx.add(S, "scaled_coeffs_A_linear", {{"ratio", ratio_a}, {"c1", s1.c1}}, ratio_a, 2.0,
            std::min(ratio_a - 1.8, 2.2 - ratio_a), 0.0, ratio_a > 1.8 && ratio_a < 2.2);
    ScaledCoeffs t1 = scaled_coeffs(lc, 1, 1.0, 1.0, 33);
    ScaledCoeffs t2 = scaled_coeffs(lc, 2, 1.0, 1.0, 33);
    const double ratio_l = t2.sup_bound / t1.sup_bound;
    ctx.add(S, "scaled_coeffs_ell_stable", {{"ratio", ratio_l}}, ratio_l, 1.2, 1.2 - ratio_l,
            0.0, ratio_l <= 1.2);
  }
}

// ---- sobolev-equiv suite ---------------------------------------------------

void run_sobolev(Ctx& ctx) {
  const std::string S = "sobolev-equiv";
  const uint64_t seed = ctx.cfg.seed;
  RealVector xi(5);
  xi << -2, -1, 0, 1, 2;

  auto make_states = [&](const HermiteBasis& basis, int count, int modes, uint64_t stream) {
    std::vector<FiberField> states;
    CounterRng rng(seed, stream);
    for (int i = 0; i < count; ++i) {
      FiberField u;
      u.p_dims = 1;
      u.cutoff = basis.cutoff;
      u.xi = xi;
      u.coef = Matrix::Zero(basis.dim(), xi.size());
      for (long k = 0; k < xi.size(); ++k)
        for (int n = 0; n < modes; ++n) u.coef(n, k) = Complex(rng.gaussian(), rng.gaussian());
      u.coef /= u.coef.norm();
      states.push_back(u);
    }
    return states;
  };

  std::string table = "s,N,C_lower,C_upper\n";

  {  // (ii) against the monomial characterization (iv), two cutoffs
    for (int s : {1, 2}) {
      auto bounds = [&](int N) {
        HermiteBasis basis = HermiteBasis::make(1, N);
        auto states = make_states(basis, 50, 16, 31 + s);
        double lo = 1e300, hi = 0;
        for (const FiberField& u : states) {
          const double r = norm_ws(u, s) / norm_monomial(u, s, basis);
          lo = std::min(lo, r);
          hi = std::max(hi, r);
        }
        return std::pair<double, double>(lo, hi);
      };
      const auto [lo1, hi1] = bounds(24);
      const auto [lo2, hi2] = bounds(48);
      const double drift = std::max(std::abs(hi2 - hi1) / hi1, std::abs(lo2 - lo1) / lo1);
      table += std::to_string(s) + ",24," + format_double(lo1) + "," + format_double(hi1) + "\n";
      table += std::to_string(s) + ",48," + format_double(lo2) + "," + format_double(hi2) + "\n";
      ctx.add(S, "norm_ii_vs_iv", {{"s", double(s)}, {"C_lower", lo1}, {"C_upper", hi1}}, drift,
              ctx.cfg.drift_tol, ctx.cfg.drift_tol - drift, drift, drift < ctx.cfg.drift_tol);
    }
  }
  {  // (ii) against the dyadic characterization (iii), two hosting cutoffs
    DyadicPartition part = build_dyadic();
    for (int s : {1, 2}) {
      auto bounds = [&](int N) {
        HermiteBasis basis = HermiteBasis::make(1, N);
        auto states = make_states(basis, 10, 16, 41 + s);
        return dyadic_norm_equivalence(states, s, part, basis);
      };
      DyadicNormReport r1 = bounds(24);
      DyadicNormReport r2 = bounds(48);
      const double drift = std::max(std::abs(r2.c_upper - r1.c_upper) / r1.c_upper,
                                    std::abs(r2.c_lower - r1.c_lower) / r1.c_lower);
      table += std::to_string(s) + ",24," + format_double(r1.c_lower) + "," +
               format_double(r1.c_upper) + "\n";
      ctx.add(S, "norm_ii_vs_iii", {{"s", double(s)}, {"C_lower", r1.c_lower},
                                    {"C_upper", r1.c_upper}},
              drift, ctx.cfg.drift_tol, ctx.cfg.drift_tol - drift, drift,
              drift < ctx.cfg.drift_tol && r1.c_lower > 0);
    }
  }
  {  // monomial (iv) against weighted (v)
    HermiteBasis basis = HermiteBasis::make(1, 24);
    auto states = make_states(basis, 25, 18, 51);
    double lo = 1e300, hi = 0;
    for (const FiberField& u : states) {
      const double r = norm_monomial(u, 1, basis) / norm_weighted(u, 1, basis);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    ctx.add(S, "norm_iv_vs_v", {{"C_lower", lo}, {"C_upper", hi}}, hi / lo, 10.0, 10.0 - hi / lo,
            0.0, hi / lo < 10.0);
  }
  {  // W^2 fiber: commutes with the oscillator, floor at 1
    HermiteBasis basis = HermiteBasis::make(1, 24);
    const RealVector grid = (RealVector(4) << 0.0, 0.5, 2.0, 16.0).finished();
    const double cg = default_cg(grid, basis);
    double min_eig = 1e300, comm = 0;
    for (long i = 0; i < grid.size(); ++i) {
      RealVector one(1);
      one(0) = grid(i);
      FiberOperator w2 = w2_fiber(one, cg, basis);
      min_eig = std::min(min_eig, w2.matrix.diagonal().real().minCoeff());
      comm = std::max(comm, (w2.matrix * op_number(basis).matrix -
                             op_number(basis).matrix * w2.matrix)
                                .norm());
    }
    ctx.add(S, "w2_fiber_floor", {{"C_g", cg}, {"min_eig", min_eig}}, comm, 0.0, min_eig - 1.0,
            0.0, comm == 0.0 && min_eig >= 1.0);
  }
  {  // two-index embedding on 100 states
    HermiteBasis basis = HermiteBasis::make(1, 32);
    int violations = 0;
    for (int s1 : {1, 2}) {
      auto states = make_states(basis, 50, 28, 61 + s1);
      for (const FiberField& u : states) {
        const double lhs = norm_ws1s2(u, s1, 1.0, 1.0);
        const double rhs = norm_ws1s2(u, 0, 1.0 + s1 / 2.0, 1.0);
        if (lhs > rhs * (1.0 + 1e-12)) ++violations;
      }
    }
    ctx.add(S, "two_index_embedding", {{"states", 100.0}}, double(violations), 0.0,
            -double(violations), 0.0, violations == 0);
  }
  ctx.tables["sobolev_equivalence.csv"] = table;
}

// ---- quasimode suite -----------------------------------------------------

void run_quasimode(Ctx& ctx) {
  const std::string S = "quasimode";
  auto phi = [](double s) { return s * s * std::exp(-s); };
  HermiteBasis basis = HermiteBasis::make(1, 64);
  QGrid qg{16, 2.0 * M_PI};

  for (const std::string preset : {std::string("flat"), std::string("sin1d:0.1")}) {
    MetricField m = MetricField::from_preset(preset);
    QuasimodeReport base = quasimode(m, phi, 1.0, qg, basis);
    const double rel_y = base.norm_Yu / base.norm_Ou;
    const double y_tol = (preset == "flat") ? 1e-8 : 1e-6;
    ctx.add(S, "transport_residual", {{"flat", preset == "flat" ? 1.0 : 0.0}}, rel_y, y_tol,
            y_tol - rel_y, 0.0, rel_y < y_tol);

    std::vector<double> values;
    for (double bb : {1.0, 2.0, 4.0, 8.0}) {
      QuasimodeReport rep = quasimode(m, phi, bb, qg, basis);
      values.push_back(rep.norm_Pplus * bb * bb);
    }
    double worst = 0;
    for (double v : values) worst = std::max(worst, std::abs(v - values[0]) / values[0]);
    ctx.add(S, "residual_b2_constancy",
            {{"flat", preset == "flat" ? 1.0 : 0.0}, {"value", values[0]}}, worst, 0.05,
            0.05 - worst, 0.0, worst < 0.05);
  }
  {  // refinement study on the perturbed metric
    MetricField m = MetricField::from_preset("sin1d:0.1");
    QuasimodeReport coarse = quasimode(m, phi, 1.0, QGrid{12, 2.0 * M_PI}, HermiteBasis::make(1, 48));
    QuasimodeReport fine = quasimode(m, phi, 1.0, qg, basis);
    ctx.add(S, "transport_residual_refinement",
            {{"coarse", coarse.norm_Yu}, {"fine", fine.norm_Yu}}, fine.norm_Yu, coarse.norm_Yu * 1.5,
            coarse.norm_Yu * 1.5 - fine.norm_Yu, 0.0, fine.norm_Yu <= coarse.norm_Yu * 1.5);
  }
}

// ---- oscillator-compare suite ---------------------------------------------

void run_oscillator_compare(Ctx& ctx) {
  const std::string S = "oscillator-compare";
  HermiteBasis basis = HermiteBasis::make(2, 12);

  {  // identical metrics
    RealMatrix g = RealMatrix::Identity(2, 2);
    OscillatorCompareReport rep = oscillator_compare(g, g, basis);
    const double dev = std::abs(rep.c_both - 1.0);
    ctx.add(S, "identical_metrics", {}, dev, 1e-9, 1e-9 - dev, 0.0,
            dev < 1e-9 && rep.diff_constant == 0.0);
  }
  {  // doubled metric: bounded constant, cutoff-stable
    RealMatrix g1 = RealMatrix::Identity(2, 2);
    RealMatrix g2 = 2.0 * g1;
    OscillatorCompareReport r1 = oscillator_compare(g1, g2, HermiteBasis::make(2, 10));
    OscillatorCompareReport r2 = oscillator_compare(g1, g2, HermiteBasis::make(2, 20));
    const double drift = std::abs(r2.c_both - r1.c_both) / r1.c_both;
    ctx.add(S, "doubled_metric_stability", {{"C", r1.c_both}}, drift, 0.05, 0.05 - drift, drift,
            drift < 0.05 && r1.c_both < 10.0);
  }
  {  // difference bound slope 1 in ||g2 - g1||
    RealMatrix g1 = RealMatrix::Identity(2, 2);
    RealMatrix e(2, 2);
    e << 0.4, 0.1, 0.1, 0.7;
    std::vector<double> ts = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}, diffs;
    for (double t : ts) {
      RealMatrix g2 = g1 + t * e;
      OscillatorCompareReport rep = oscillator_compare(g1, g2, basis);
      diffs.push_back(rep.diff_constant * (g2 - g1).norm());
    }
    FitResult f = exponent_fit(ts, diffs);
    const double dev = std::abs(f.slope - 1.0);
    ctx.add(S, "difference_bound_slope", {{"slope", f.slope}}, dev, 0.05, 0.05 - dev, f.stderr_,
            dev < 0.05);
  }
}

// ---- refined accretivity checks (shared by euclid-verify at full runs) ----

void run_refined_accretivity(Ctx& ctx) {
  const std::string S = "euclid-verify";
  PGrid g = PGrid::make(10.0, 320, PGrid::Boundary::dirichlet);

  // the scaled transport coefficient from the perturbed 1D metric at its
  // critical point; c1 reported by the geometry module
  MetricField m = MetricField::from_preset("sin1d:0.1");
  RealVector q0(1);
  q0(0) = M_PI / 2;
  NormalChart lc = linear_chart(m, q0, 8.0);
  ScaledCoeffs sc = scaled_coeffs(lc, 0, 1.0, 1.0, 129);
  const double c1 = sc.c1;

  {  // paper rule leaves no negative margins across the sweep
    int negative = 0;
    for (double bb : ctx.cfg.b_sweep) {
      for (double A : ctx.cfg.A_sweep) {
        GkfpParams pars = GkfpParams::from_ell(bb, 0);
        pars.kappa_b = 1.0 + 16.0 * c1 * A * bb;
        RefinedAccretivityReport rep = refined_accretivity(pars, A, c1 * A, g);
        if (!rep.pass) ++negative;
      }
    }
    ctx.add(S, "refined_accretivity_paper_rule", {{"c1", c1}}, double(negative), 0.0,
            -double(negative), 0.0, negative == 0);
  }
  {  // fixed kappa_b: the A sweep locates the threshold
    const double bb = 64.0;
    double a_cross = -1;
    double prev_margin = 1e300;
    bool monotone = true;
    for (double A : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      GkfpParams pars = GkfpParams::from_ell(bb, 0);
      pars.kappa_b = 3.0;
      RefinedAccretivityReport rep = refined_accretivity(pars, A, c1 * A, g);
      if (rep.margin_real < 0 && a_cross < 0) a_cross = A;
      if (rep.margin_real > prev_margin + 1e-12) monotone = false;
      prev_margin = rep.margin_real;
    }
    ctx.add(S, "refined_accretivity_threshold", {{"b", bb}, {"A_cross", a_cross}},
            a_cross, 0.0, a_cross, 0.0, a_cross > 0 && monotone,
            "margin decreases with A and turns negative beyond the kappa rule");
  }
}

}  // namespace

SuiteResult run_suite(const RunConfig& config) {
  config.validate();
  Ctx ctx{config, {}, {}};
  const std::string& s = config.suite;
  bool known = false;
  auto want = [&](const char* name) {
    if (s == name || s == "full") {
      known = true;
      return true;
    }
    return false;
  };
  if (want("identities")) run_identities(ctx);
  if (want("airy-scan")) run_airy(ctx);
  if (want("euclid-verify")) {
    run_euclid(ctx);
    run_refined_accretivity(ctx);
  }
  if (want("partition-check")) run_partitions(ctx);
  if (want("metric-cert")) run_metric_cert(ctx);
  if (want("sobolev-equiv")) run_sobolev(ctx);
  if (want("quasimode")) run_quasimode(ctx);
  if (want("oscillator-compare")) run_oscillator_compare(ctx);
  if (!known) throw std::runtime_error("unknown suite: " + s);

  SuiteResult result;
  result.records = std::move(ctx.records);
  result.tables = std::move(ctx.tables);
  return result;
}

int run_and_write(const RunConfig& config, std::ostream& log) {
  SuiteResult result;
  try {
    config.validate();
  } catch (const std::exception& e) {
    log << "config error: " << e.what() << "\n";
    return 1;
  }
  try {
    result = run_suite(config);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    std::filesystem::create_directories(config.output);
    const std::string csv = records_to_csv(result.records);
    std::ofstream csv_out(config.output + "/summary.csv", std::ios::binary);
    if (!csv_out) throw std::runtime_error("cannot write " + config.output + "/summary.csv");
    csv_out << csv;
    std::map<std::string, std::string> env;
    env["version"] = "gkfp 0.1.0";
    env["config_hash"] = config_hash(config.to_text());
    env["suite"] = config.suite;
    env["seed"] = std::to_string(config.seed);
    std::ofstream json_out(config.output + "/report.json", std::ios::binary);
    json_out << records_to_json(result.records, env);
    for (const auto& [name, body] : result.tables) {
      std::ofstream t(config.output + "/" + name, std::ios::binary);
      t << body;
    }
  } catch (const std::exception& e) {
    log << "io error: " << e.what() << "\n";
    return 1;
  }

  int fails = 0;
  for (const CheckRecord& r : result.records)
    if (r.status == CheckStatus::fail) ++fails;
  log << result.records.size() << " checks, " << fails << " failed\n";
  return fails == 0 ? 0 : 2;
}

}  // namespace gkfp
