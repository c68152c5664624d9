#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "stackmf/errors.hpp"
#include "stackmf/meanfield.hpp"

using namespace stackmf;
using namespace stackmf::dynamics;
using namespace stackmf::meanfield;

namespace {

ModelSpec make_model(double b, double T, double h, CoefficientSet::Params p, double L = 5.0,
                     CoefficientSet::Family fam = CoefficientSet::Family::linear_quadratic) {
  ModelSpec m;
  m.grid = TimeGrid(b, T, h);
  m.coefficients = CoefficientSet(fam, p, L);
  return m;
}

// Follower mean reversion towards the population mean, leader pulled by it.
ModelSpec interacting_model() {
  CoefficientSet::Params p;
  p.a0 = -0.2;
  p.c0 = 0.6;
  p.s0 = 0.5;
  p.a1 = -1.0;
  p.c1 = 0.8;
  p.k1 = 0.5;
  p.s1 = 0.5;
  auto m = make_model(0.3, 1.0, 0.05, p);
  m.leader_initial = {LeaderInitialLaw::Family::scaled_brownian, 0.5, 0.4, 1.0};
  m.follower_initial = {FollowerInitialLaw::Family::gaussian, 1.0, 0.5};
  return m;
}

}  // namespace

TEST_CASE("delay law partitions") {
  const auto u = partition_delay_law(DelayLaw::uniform(0.0, 1.0), 4);
  REQUIRE(u.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(u[k].delay == doctest::Approx(0.25 * double(k)));
    CHECK(u[k].weight == doctest::Approx(0.25));
  }
  const auto d = partition_delay_law(DelayLaw::discrete({0.1, 0.3}, {0.25, 0.75}), 2);
  REQUIRE(d.size() == 2);
  CHECK(d[0].delay == doctest::Approx(0.1));
  CHECK(d[0].weight == doctest::Approx(0.25));
  CHECK(d[1].delay == doctest::Approx(0.2));
  CHECK(d[1].weight == doctest::Approx(0.75));
  const auto point = partition_delay_law(DelayLaw::degenerate(0.4), 7);
  REQUIRE(point.size() == 1);
  CHECK(point[0].delay == 0.4);
  CHECK(point[0].weight == 1.0);

  // Cells without mass disappear.
  const auto gaps = partition_delay_law(DelayLaw::discrete({0.0, 1.0}, {0.5, 0.5}), 10);
  CHECK(gaps.size() == 2);

  const TimeGrid g(1.0, 1.0, 0.5);
  const auto merged = snap_partition(u, g);
  // 0.25 and 0.5 both land on 0.5; 0.75 rounds up to 1.
  REQUIRE(merged.size() == 3);
  CHECK(merged[0].delay == 0.0);
  CHECK(merged[1].delay == 0.5);
  CHECK(merged[1].weight == doctest::Approx(0.5));
  CHECK(merged[2].delay == 1.0);
}

TEST_CASE("balanced partition level") {
  CHECK(balanced_partition_level(1, 6.0, 101) == 8);
  std::size_t prev = 0;
  for (std::size_t N : {3u, 10u, 50u, 200u, 1000u, 10000u}) {
    const auto n = balanced_partition_level(2, 8.0, N);
    CHECK(n >= prev);
    prev = n;
  }
  CHECK(balanced_partition_level(3, 5.0, 1000000000) <= 10000);
  CHECK_THROWS_AS(balanced_partition_level(1, 4.0, 100), ParameterError);
  CHECK_THROWS_AS(balanced_partition_level(1, 6.0, 2), ParameterError);
}

TEST_CASE("fixed point option validation") {
  const auto m = interacting_model();
  const std::vector<DelayAtom> atoms{{0.1, 1.0}};
  FixedPointOptions o;
  o.K = 99;
  CHECK_THROWS_AS(solve_conditional_law(m, {}, atoms, {1, 0}, o), ParameterError);
  o.K = 100;
  o.damping = 0.0;
  CHECK_THROWS_AS(solve_conditional_law(m, {}, atoms, {1, 0}, o), ParameterError);
  o.damping = 1.0;
  CHECK_THROWS_AS(solve_conditional_law(m, {}, {{0.1, 0.6}, {0.2, 0.3}}, {1, 0}, o),
                  ValidationError);
}

TEST_CASE("no feedback converges after one iteration") {
  CoefficientSet::Params p;
  p.a1 = -0.5;
  p.s1 = 1.0;
  p.k1 = 0.3;
  p.s0 = 1.0;
  auto m = make_model(0.2, 1.0, 0.05, p);
  m.follower_initial = {FollowerInitialLaw::Family::gaussian, 0.0, 1.0};
  FixedPointOptions o;
  o.K = 200;
  const auto [flow, rep] = solve_conditional_law(m, {}, {{0.1, 0.5}, {0.2, 0.5}}, {3, 1}, o);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  REQUIRE(rep.discrepancies.size() == 2);
  CHECK(rep.discrepancies[1] == 0.0);
}

TEST_CASE("brownian particles have second moment t") {
  CoefficientSet::Params p;
  p.s1 = 1.0;
  auto m = make_model(0.0, 1.0, 0.05, p);
  FixedPointOptions o;
  o.K = 10000;
  const auto [flow, rep] = solve_conditional_law(m, {}, {{0.0, 1.0}}, {5, 0}, o);
  for (std::size_t s : {5u, 10u, 20u}) {
    const double t = m.grid.time(s);
    CHECK(std::abs(flow.features[s].second_moment / t - 1.0) < 0.1);
  }
}

TEST_CASE("picard iteration contracts") {
  const auto m = interacting_model();
  FixedPointOptions o;
  o.K = 300;
  o.tol = 1e-9;
  const auto [flow, rep] =
      solve_conditional_law(m, {}, partition_delay_law(DelayLaw::uniform(0.0, 0.3), 3), {2, 0}, o);
  CHECK(rep.converged);
  REQUIRE(rep.discrepancies.size() >= 4);
  for (std::size_t j = 0; j + 1 < 4; ++j) {
    CHECK(rep.discrepancies[j + 1] < rep.discrepancies[j]);
  }
  CHECK(rep.discrepancies.back() <= o.tol);

  FixedPointOptions damped = o;
  damped.damping = 0.5;
  damped.max_iter = 80;
  const auto [dflow, drep] =
      solve_conditional_law(m, {}, partition_delay_law(DelayLaw::uniform(0.0, 0.3), 3), {2, 0},
                            damped);
  CHECK(drep.converged);
  CHECK(std::abs(dflow.features.back().mean[0] - flow.features.back().mean[0]) < 1e-6);
}

TEST_CASE("the flow does not look ahead") {
  const auto m = interacting_model();
  FixedPointOptions o;
  o.K = 150;
  o.tol = 0.0;
  o.max_iter = 6;
  const auto atoms = partition_delay_law(DelayLaw::uniform(0.0, 0.3), 2);
  const NoiseRecord plain{9, 4};
  NoiseRecord forked = plain;
  forked.leader_fork_step = 8;
  const auto [a, ra] = solve_conditional_law(m, {}, atoms, plain, o);
  const auto [b, rb] = solve_conditional_law(m, {}, atoms, forked, o);
  CHECK(ra.iterations == 6);
  CHECK(rb.iterations == 6);
  const std::size_t per_step = a.atoms.size() * a.K * a.n1;
  const std::size_t nb = m.grid.history_steps();
  for (std::size_t s = 0; s <= 8; ++s) {
    CHECK(std::equal(a.particles.begin() + s * per_step, a.particles.begin() + (s + 1) * per_step,
                     b.particles.begin() + s * per_step));
    CHECK(a.leader[nb + s] == b.leader[nb + s]);
  }
  CHECK(a.leader[nb + 12] != b.leader[nb + 12]);
  CHECK(!std::equal(a.particles.begin() + 12 * per_step, a.particles.begin() + 13 * per_step,
                    b.particles.begin() + 12 * per_step));
}

TEST_CASE("mixture moments") {
  const auto m = interacting_model();
  FixedPointOptions o;
  o.K = 120;
  const auto [flow, rep] =
      solve_conditional_law(m, {}, {{0.0, 0.3}, {0.15, 0.2}, {0.3, 0.5}}, {4, 0}, o);
  for (std::size_t s : {0u, 7u, 20u}) {
    double mix = 0.0, worst = 0.0;
    for (std::size_t a = 0; a < flow.atoms.size(); ++a) {
      const double ma = std::pow(measures::moment(flow.atom_measure(s, a), 2.0), 2);
      mix += flow.atoms[a].weight * ma;
      worst = std::max(worst, ma);
    }
    const double whole = std::pow(measures::moment(flow.measure_at(s), 2.0), 2);
    CHECK(std::abs(whole - mix) <= 1e-12 * std::max(1.0, mix));
    CHECK(whole <= worst + 1e-12);
    CHECK(flow.features[s].second_moment == doctest::Approx(whole).epsilon(1e-12));
  }
  const auto sub = flow.subsampled_measure_at(5, 90);
  CHECK(sub.size() <= 90);
}

TEST_CASE("limit pair without interaction matches the N-player run") {
  CoefficientSet::Params p;
  p.a0 = -0.3;
  p.s0 = 0.5;
  p.a1 = -0.4;
  p.k1 = 0.6;
  p.e1 = 0.3;
  p.s1 = 0.7;
  auto m = make_model(0.4, 1.0, 0.05, p);
  m.leader_initial = {LeaderInitialLaw::Family::ou_path, 0.2, 0.3, 1.0};
  m.follower_initial = {FollowerInitialLaw::Family::gaussian, 0.0, 1.0};
  PolicySet pol;
  pol.follower.px = -0.1;
  const NoiseRecord noise{21, 7};
  const std::vector<double> delays{0.1, 0.4, 0.0, 0.25};
  const auto [flow, rep] = solve_conditional_law(m, pol, {{0.2, 1.0}}, noise, {});
  const auto lim = simulate_limit_pair(m, pol, flow, noise, delays);
  const auto np = simulate_nplayer_with_delays(m, pol, delays, noise);
  CHECK(lim.leader == np.leader);
  CHECK(lim.followers == np.followers);

  CHECK_THROWS_AS(simulate_limit_pair(m, pol, flow, {22, 7}, delays), ValidationError);
  CHECK_THROWS_AS(simulate_limit_pair(m, pol, flow, {21, 8}, delays), ValidationError);
}

TEST_CASE("frozen leader stays constant in the limit") {
  CoefficientSet::Params p;
  p.s1 = 1.0;
  p.c1 = 0.5;
  auto m = make_model(0.2, 1.0, 0.1, p);
  m.leader_initial = {LeaderInitialLaw::Family::constant, 1.25, 0.0, 1.0};
  const NoiseRecord noise{1, 0};
  FixedPointOptions o;
  o.K = 100;
  const auto [flow, rep] = solve_conditional_law(m, {}, {{0.0, 1.0}}, noise, o);
  const auto lim = simulate_limit_pair(m, {}, flow, noise, std::vector<double>{0.0, 0.2});
  for (double x : lim.leader) CHECK(x == 1.25);
  const auto costs = evaluate_costs_limit(lim, m, flow);
  CHECK(costs.leader == 0.0);
  CHECK(costs.followers.size() == 2);
}

namespace {

HolderReport holder_run(CoefficientSet::Params p) {
  auto m = make_model(1.0, 1.0, 0.005, p);
  m.leader_initial = {LeaderInitialLaw::Family::scaled_brownian, 0.0, 1.0, 1.0};
  FixedPointOptions o;
  o.K = 100;
  const std::vector<double> deltas{0.5, 0.52, 0.54, 0.58, 0.66, 0.82};
  return holder_exponent_estimate(m, {}, {{0.5, 1.0}}, deltas, 300, 17, o);
}

}  // namespace

TEST_CASE("delay regularity exponents") {
  CoefficientSet::Params diffusion;
  diffusion.s0 = 1.0;
  diffusion.s1 = 0.5;
  diffusion.e1 = 1.0;
  const auto d = holder_run(diffusion);
  CHECK(!d.flagged);
  CHECK(std::abs(d.exponent - 1.0) < 0.2);

  CoefficientSet::Params drift;
  drift.s0 = 1.0;
  drift.s1 = 0.5;
  drift.k1 = 1.0;
  const auto r = holder_run(drift);
  CHECK(!r.flagged);
  CHECK(std::abs(r.exponent - 2.0) < 0.3);

  CoefficientSet::Params none;
  none.s1 = 1.0;
  none.a1 = -0.5;
  const auto n = holder_run(none);
  CHECK(n.flagged);
}
