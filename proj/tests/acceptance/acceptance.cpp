// Acceptance suite: one line per criterion. Run everything, or a subset
// with --only 4 or --only 1,2,3.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stackmf/cli.hpp"
#include "stackmf/coupling.hpp"
#include "stackmf/meanfield.hpp"
#include "stackmf/measures.hpp"
#include "stackmf/rates.hpp"

using namespace stackmf;
using namespace stackmf::dynamics;
using measures::DiscreteMeasure;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string printf_str(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string printf_str(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

std::vector<double> random_simplex(std::mt19937_64& gen, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (double& x : p) s += (x = e(gen));
  for (double& x : p) x /= s;
  return p;
}

DiscreteMeasure random_measure(std::mt19937_64& gen, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> z;
  std::vector<double> x(n * dim);
  for (double& v : x) v = z(gen);
  return DiscreteMeasure(dim, std::move(x), random_simplex(gen, n));
}

// Leader shared by the SDE scenarios.
ModelSpec base_model(double T) {
  ModelSpec m;
  m.grid = TimeGrid(0.4, T, 0.05);
  m.leader_initial = {LeaderInitialLaw::Family::scaled_brownian, 0.0, 0.5, 1.0};
  m.follower_initial = {FollowerInitialLaw::Family::gaussian, 0.5, 1.0};
  return m;
}

CoefficientSet::Params leader_params() {
  CoefficientSet::Params p;
  p.a0 = -0.2;
  p.c0 = 0.5;
  p.s0 = 0.5;
  return p;
}

ModelSpec linear_in_measure_model(double T) {
  auto m = base_model(T);
  auto p = leader_params();
  p.a1 = -1.0;
  p.c1 = 0.8;
  p.k1 = 0.3;
  p.s1 = 0.5;
  p.cs1 = 0.3;
  p.q0 = p.q1 = 1.0;
  p.m0 = p.m1 = 0.5;
  m.coefficients = CoefficientSet(CoefficientSet::Family::linear_in_measure, p, 5.0);
  return m;
}

const DelayLaw kTwoAtoms = DelayLaw::discrete({0.1, 0.3}, {0.4, 0.6});
const std::vector<std::size_t> kSdeNs{8, 16, 32, 64, 128, 256};

std::string slope_text(const rates::GapReport& r) {
  return printf_str("slope %.3f +- %.3f (r2 %.3f), %zu reps, fixed-point failures %zu, "
                    "coupling violations %zu",
                    r.slope, r.slope_stderr, r.r2, r.reps, r.fixed_point_failures,
                    r.coupling_violations);
}

Outcome coupling_exactness() {
  std::mt19937_64 gen(101);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + gen() % 10;
    const auto p = random_simplex(gen, n);
    auto q = random_simplex(gen, n);
    if (trial % 5 == 0) q[gen() % n] = p[gen() % n];
    const double sq = std::accumulate(q.begin(), q.end(), 0.0);
    for (double& x : q) x /= sq;
    const auto c = coupling::build_pihat(p, q);
    double diag = 0.0, half_l1 = 0.0;
    for (std::size_t h = 0; h < n; ++h) {
      double row = 0.0, col = 0.0;
      for (std::size_t l = 0; l < n; ++l) {
        if (c.at(h, l) < 0.0) worst = std::max(worst, -c.at(h, l));
        row += c.at(h, l);
        col += c.at(l, h);
      }
      worst = std::max({worst, std::abs(row - p[h]), std::abs(col - q[h]),
                        std::abs(c.at(h, h) - std::min(p[h], q[h]))});
      diag += c.at(h, h);
      half_l1 += 0.5 * std::abs(p[h] - q[h]);
    }
    worst = std::max(worst, std::abs(diag - (1.0 - half_l1)));
  }
  return {worst <= 1e-12, printf_str("10000 pairs, worst marginal/diagonal error %.2e (tol 1e-12)",
                                     worst)};
}

Outcome mixture_convexity() {
  std::mt19937_64 gen(202);
  double worst = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + gen() % 4, dim = 1 + gen() % 3;
    std::vector<DiscreteMeasure> mus, nus;
    for (std::size_t j = 0; j < k; ++j) {
      mus.push_back(random_measure(gen, 1 + gen() % 8, dim));
      nus.push_back(random_measure(gen, 1 + gen() % 8, dim));
    }
    const auto lambdas = random_simplex(gen, k);
    const auto r = coupling::verify_mixture_convexity(mus, nus, lambdas);
    worst = std::max(worst, r.lhs - r.rhs);
  }
  return {worst <= 1e-9, printf_str("200 instances, max(lhs - rhs) = %.3e (tol 1e-9)", worst)};
}

Outcome ot_oracles() {
  std::mt19937_64 gen(303);
  double diff = 0.0, triangle = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 200; ++trial) {
    const auto mu = random_measure(gen, 1 + gen() % 40, 1);
    const auto nu = random_measure(gen, 1 + gen() % 40, 1);
    diff = std::max(diff, std::abs(measures::w2_exact_1d(mu, nu) -
                                   measures::w2_exact_lp(mu, nu).first));
  }
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 1 + gen() % 3;
    const auto a = random_measure(gen, 1 + gen() % 12, dim);
    const auto b = random_measure(gen, 1 + gen() % 12, dim);
    const auto c = random_measure(gen, 1 + gen() % 12, dim);
    const double ab = measures::w2_exact_lp(a, b).first, bc = measures::w2_exact_lp(b, c).first,
                 ac = measures::w2_exact_lp(a, c).first;
    triangle = std::max(triangle, ac - (ab + bc));
  }
  return {diff < 1e-9 && triangle <= 1e-12,
          printf_str("1-D vs LP max |diff| %.2e (tol 1e-9); triangle max excess %.2e",
                     diff, triangle)};
}

Outcome empirical_rate() {
  const std::vector<std::size_t> Ns{50, 100, 200, 400, 800, 1600, 3200};
  bool ok = true;
  std::string detail;
  for (int n1 : {1, 3, 4, 6}) {
    auto r = rates::empirical_rate_curve(n1, Ns, 200, 5);
    rates::judge(r, 0.15, false);
    ok = ok && r.verdict == "pass";
    detail += printf_str("%sn1=%d%s %.3f +- %.3f vs %.3f %s", detail.empty() ? "" : "; ", n1,
                         n1 == 4 ? " (value/log N)" : "", r.slope, r.slope_stderr,
                         r.predicted_slope, r.verdict.c_str());
  }
  return {ok, detail + " (tol 0.15)"};
}

Outcome degenerate_w2_curve() {
  auto m = base_model(1.0);
  auto p = leader_params();
  p.a1 = -1.0;
  p.c1 = 0.3;
  p.k1 = 0.2;
  p.w1 = 1.5;
  p.beta = 2.0;
  p.s1 = 0.3;
  m.coefficients = CoefficientSet(CoefficientSet::Family::smooth_nonlinear, p, 5.0);
  m.follower_initial = {FollowerInitialLaw::Family::bimodal, 2.0, 0.3};
  rates::ExperimentOptions o;
  o.reps = 100;
  o.seed = 7;
  o.fixed_point.K = 4096;
  o.regime = rates::Regime::degenerate_delta;
  o.assert_rate = true;
  o.slope_tolerance = 0.25;
  const auto r = rates::wasserstein_gap_curve(m, {}, DelayLaw::degenerate(0.1), kSdeNs, o);
  return {r.verdict == "pass",
          slope_text(r) + printf_str(", target %.2f +- 0.25", r.predicted_slope)};
}

Outcome discrete_state_gap() {
  auto m = base_model(1.0);
  auto p = leader_params();
  p.a1 = -1.0;
  p.c1 = 0.8;
  p.k1 = 0.3;
  p.w1 = 0.5;
  p.s1 = 0.5;
  p.e1 = 0.2;
  m.coefficients = CoefficientSet(CoefficientSet::Family::smooth_nonlinear, p, 5.0);
  rates::ExperimentOptions o;
  o.reps = 100;
  o.seed = 7;
  o.fixed_point.K = 2048;
  o.regime = rates::Regime::discrete_delta;
  o.assert_rate = true;
  o.slope_tolerance = 0.25;
  o.upper_bound_only = true;
  const auto r = rates::state_gap_experiment(m, {}, kTwoAtoms, kSdeNs, o);
  const bool ok = r.verdict == "pass" && r.coupling_violations == 0;
  return {ok, slope_text(r) + printf_str(", bound slope <= %.2f", r.predicted_slope + 0.25)};
}

Outcome linear_in_measure_rates() {
  const auto m = linear_in_measure_model(1.0);
  rates::ExperimentOptions o;
  o.reps = 100;
  o.seed = 7;
  o.fixed_point.K = 2048;
  o.regime = rates::Regime::linear_in_measure;
  o.assert_rate = true;
  o.slope_tolerance = 0.25;
  const auto s = rates::state_gap_experiment(m, {}, kTwoAtoms, kSdeNs, o);
  const auto c = rates::cost_gap_experiment(m, {}, kTwoAtoms, kSdeNs, o);
  const bool ok = s.verdict == "pass" && c.verdict == "pass" && s.coupling_violations == 0;
  return {ok, printf_str("state %.3f +- %.3f vs -1 %s; cost %.3f +- %.3f vs -0.5 %s (tol 0.25)",
                         s.slope, s.slope_stderr, s.verdict.c_str(), c.slope, c.slope_stderr,
                         c.verdict.c_str())};
}

Outcome eta_orthogonality() {
  const auto m = linear_in_measure_model(0.5);
  rates::ExperimentOptions o;
  o.reps = 10000;
  o.seed = 3;
  o.fixed_point.K = 1024;
  const auto r = rates::eta_orthogonality(m, {}, kTwoAtoms, 64, m.grid.steps(), o);
  const bool ok = r.ratio >= 0.7 && r.ratio <= 1.3;
  return {ok, printf_str("N=64, t=%.2f, lhs %.4e +- %.1e, rhs %.4e +- %.1e, ratio %.3f "
                         "(band [0.7, 1.3])",
                         m.grid.time(r.step), r.mean_square.mean, r.mean_square.se,
                         r.scaled_single.mean, r.scaled_single.se, r.ratio)};
}

Outcome holder_in_delay() {
  // Brownian leader with constant volatility and no control; its delayed
  // value enters the follower volatility.
  ModelSpec m;
  m.grid = TimeGrid(1.0, 1.0, 0.005);
  CoefficientSet::Params p;
  p.s0 = 1.0;
  p.a1 = -0.5;
  p.s1 = 0.2;
  p.e1 = 1.0;
  m.coefficients = CoefficientSet(CoefficientSet::Family::linear_quadratic, p, 5.0);
  m.leader_initial = {LeaderInitialLaw::Family::scaled_brownian, 0.0, 1.0, 1.0};
  meanfield::FixedPointOptions fp;
  fp.K = 100;
  const std::vector<double> deltas{0.5, 0.52, 0.54, 0.58, 0.66, 0.82};
  const auto r = meanfield::holder_exponent_estimate(m, {}, {{0.5, 1.0}}, deltas, 400, 9, fp);
  const bool ok = !r.flagged && std::abs(r.exponent - 1.0) <= 0.2;
  return {ok, printf_str("exponent %.3f +- %.3f over spacings %.2f..%.2f, 400 reps (target 1 +- "
                         "0.2)",
                         r.exponent, r.exponent_stderr, r.spacings.front(), r.spacings.back())};
}

Outcome epsilon_nash() {
  auto m = base_model(1.0);
  auto p = leader_params();
  p.a1 = -1.0;
  p.c1 = 0.5;
  p.k1 = 0.3;
  p.s1 = 0.4;
  p.q1 = 1.0;
  p.r1 = 1.0;
  p.q0 = p.r0 = 1.0;
  // b1 = 0: the control only enters the cost.
  m.coefficients = CoefficientSet(CoefficientSet::Family::linear_quadratic, p, 5.0);
  rates::CertifyOptions o;
  o.reps = 200;
  o.seed = 21;
  PolicySet profile;
  const auto self = rates::epsilon_nash_certify(m, profile, {profile}, {profile}, kTwoAtoms, 16, o);
  const double c = 0.6, T = m.grid.T();
  PolicySet constant;
  constant.follower.pc = c;
  const auto r = rates::epsilon_nash_certify(m, profile, {constant}, {}, kTwoAtoms, 16, o);
  const auto& d = r.deviations.front();
  const double diff = -d.advantage.mean;
  const bool ok = self.epsilon == 0.0 && self.leader_epsilon == 0.0 && r.epsilon == 0.0 &&
                  std::abs(diff - c * c * T) <= 3.0 * d.advantage.se + 1e-9;
  return {ok, printf_str("self library eps %.3g / leader %.3g; J(dev) - J(profile) = %.6f +- %.1e "
                         "vs c^2 T = %.6f; eps %.3g; N=16",
                         self.epsilon, self.leader_epsilon, diff, d.advantage.se, c * c * T,
                         r.epsilon)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  std::ostringstream log;
  bool ok = true;
  std::string detail;
  // Byte-identical artifacts for 1 and 4 threads.
  for (const char* name : {"linear-in-measure", "epsilon-nash"}) {
    auto cfg = cli::find_preset(name).config;
    cfg.experiment.Ns = {8, 16, 32};
    cfg.experiment.reps = 50;
    cfg.experiment.K = 256;
    std::vector<std::string> csvs, reports;
    for (std::size_t threads : {1, 4}) {
      const auto dir = fs::temp_directory_path() / ("stackmf_acceptance_" + std::to_string(threads));
      fs::remove_all(dir);
      cli::RunOptions ro;
      ro.threads = threads;
      ro.output_dir = dir.string();
      const auto res = cli::run_experiment(cfg, ro, log);
      csvs.push_back(res.csv);
      reports.push_back(res.report);
      fs::remove_all(dir);
    }
    const bool same = csvs[0] == csvs[1] && reports[0] == reports[1] && !csvs[0].empty();
    ok = ok && same;
    detail += printf_str("%s csv %s; ", name, same ? "identical" : "DIFFERS");
  }

  // Relabelling followers permutes every output.
  auto m = linear_in_measure_model(1.0);
  PolicySet pol;
  pol.follower.px = -0.2;
  pol.follower.pz = 0.1;
  const std::size_t N = 12;
  const auto delays = snap_delays_to_grid(sample_delays(kTwoAtoms, N, 5), m.grid);
  const NoiseRecord noise{17, 2};
  const auto a = simulate_nplayer_with_delays(m, pol, delays, noise);
  std::vector<std::uint32_t> perm(N);
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 gen(11);
  std::shuffle(perm.begin() + 1, perm.end(), gen);  // follower 0 may be a deviator
  std::vector<double> pd(N);
  for (std::size_t j = 0; j < N; ++j) pd[j] = delays[perm[j]];
  const auto b = simulate_nplayer_relabelled(m, pol, pd, noise, {perm});
  const auto ca = evaluate_costs_nplayer(a, m), cb = evaluate_costs_nplayer(b, m);
  bool permuted = a.leader == b.leader && ca.leader == cb.leader;
  for (std::size_t j = 0; j < N; ++j) {
    permuted = permuted && cb.followers[j] == ca.followers[perm[j]];
    for (std::size_t s = 0; s <= m.grid.steps(); ++s) {
      permuted = permuted && b.follower(j, s)[0] == a.follower(perm[j], s)[0];
    }
  }
  ok = ok && permuted;
  detail += printf_str("relabelled N=%zu run %s", N, permuted ? "permutes exactly" : "DIFFERS");
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "coupling exactness", 5, coupling_exactness},
      {2, "mixture convexity", 30, mixture_convexity},
      {3, "OT oracle agreement", 30, ot_oracles},
      {4, "empirical-measure rate", 600, empirical_rate},
      {5, "degenerate-delay W2 gap curve", 1200, degenerate_w2_curve},
      {6, "discrete-delay state gap", 1800, discrete_state_gap},
      {7, "linear-in-measure O(1/N)", 1800, linear_in_measure_rates},
      {8, "eta orthogonality", 300, eta_orthogonality},
      {9, "Hoelder in delay", 600, holder_in_delay},
      {10, "epsilon-Nash structure", 600, epsilon_nash},
      {11, "determinism and symmetry", 120, determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--only k[,k...]]\n", argv[0]);
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failures;
    std::printf("criterion %2d %s  %s: %s [%.1f s, budget %.0f s%s]\n", c.id,
                pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs, c.budget_seconds,
                in_budget ? "" : ", EXCEEDED");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
