#include "stackmf/cli.hpp"

namespace stackmf::cli {

namespace {

// Leader shared by most presets: mean reverting, pulled towards the crowd,
// with a Brownian history on [-b, 0].
ModelConfig base_model() {
  ModelConfig m;
  m.b = 0.4;
  m.T = 1.0;
  m.h = 0.05;
  m.params.a0 = -0.2;
  m.params.c0 = 0.5;
  m.params.s0 = 0.5;
  m.leader_initial = "scaled_brownian";
  m.leader_sigma = 0.5;
  m.follower_initial = "gaussian";
  m.follower_center = 0.5;
  m.follower_spread = 1.0;
  return m;
}

ModelConfig smooth_model() {
  auto m = base_model();
  m.family = "smooth_nonlinear";
  m.params.a1 = -1.0;
  m.params.c1 = 0.8;
  m.params.k1 = 0.3;
  m.params.w1 = 0.5;
  m.params.s1 = 0.5;
  m.params.e1 = 0.2;
  return m;
}

ModelConfig linear_model() {
  auto m = base_model();
  m.family = "linear_in_measure";
  auto& p = m.params;
  p.a1 = -1.0;
  p.c1 = 0.8;
  p.k1 = 0.3;
  p.s1 = 0.5;
  p.cs1 = 0.3;
  p.q0 = p.q1 = 1.0;
  p.m0 = p.m1 = 0.5;
  return m;
}

DelayConfig two_atoms() {
  DelayConfig d;
  d.kind = "discrete";
  d.atoms = {0.1, 0.3};
  d.probs = {0.4, 0.6};
  return d;
}

ScenarioConfig scenario(std::string name, ModelConfig m, DelayConfig d, std::string kind) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.model = std::move(m);
  c.delay = std::move(d);
  c.experiment.kind = std::move(kind);
  c.experiment.Ns = {8, 16, 32, 64, 128};
  c.experiment.reps = 100;
  c.experiment.K = 1024;
  c.seed = 7;
  c.output_dir = "out/" + c.name;
  return c;
}

std::vector<Preset> make_presets() {
  std::vector<Preset> out;

  {
    auto m = base_model();
    m.family = "smooth_nonlinear";
    m.params.a1 = -1.0;
    m.params.c1 = 0.3;
    m.params.k1 = 0.2;
    m.params.w1 = 1.5;
    m.params.beta = 2.0;
    m.params.s1 = 0.3;
    m.follower_initial = "bimodal";
    m.follower_center = 2.0;
    m.follower_spread = 0.3;
    DelayConfig d;
    d.a = d.b = 0.1;
    auto c = scenario("degenerate-delay-n1-1", m, d, "w2_gap");
    c.experiment.regime = "degenerate_delta";
    c.experiment.assert_rate = true;
    out.push_back({c.name, "W2 gap curve against z with one fixed delay, n1 = 1", c});
  }
  {
    auto c = scenario("discrete-two-atom", smooth_model(), two_atoms(), "state_gap");
    c.experiment.regime = "discrete_delta";
    c.experiment.assert_rate = true;
    c.experiment.upper_bound_only = true;
    out.push_back({c.name, "squared state gap with delays on two atoms", c});
  }
  {
    DelayConfig d;
    d.kind = "uniform";
    d.a = 0.1;
    d.b = 0.3;
    // The leader is controlled and its volatility reads the crowd.
    auto m = smooth_model();
    m.params.b0 = 0.5;
    m.params.cs0 = 0.3;
    auto c = scenario("uniform-delay", m, d, "state_gap");
    c.policy.leader.pz = -0.5;
    c.experiment.Ns = {8, 16, 32, 64};
    c.experiment.regime = "general";
    c.experiment.assert_rate = true;
    c.experiment.upper_bound_only = true;
    out.push_back({c.name, "squared state gap with uniform delays and balanced partitions", c});
  }
  {
    // Constant leader volatility and no leader control.
    auto m = smooth_model();
    m.params.cs0 = 0.0;
    m.params.b0 = 0.0;
    DelayConfig d;
    d.kind = "uniform";
    d.a = 0.1;
    d.b = 0.3;
    auto c = scenario("control-free-sigma0", m, d, "state_gap");
    c.experiment.Ns = {8, 16, 32, 64};
    c.experiment.regime = "sigma0_control_free";
    c.experiment.assert_rate = true;
    c.experiment.upper_bound_only = true;
    out.push_back({c.name, "squared state gap when the leader volatility is control free", c});
  }
  {
    auto c = scenario("linear-in-measure", linear_model(), two_atoms(), "state_gap");
    c.experiment.Ns = {8, 16, 32, 64, 128, 256};
    c.experiment.regime = "linear_in_measure";
    c.experiment.assert_rate = true;
    out.push_back({c.name, "O(1/N) squared state gap for coefficients linear in the measure", c});
  }
  {
    auto c = scenario("linear-in-measure-cost", linear_model(), two_atoms(), "cost_gap");
    c.experiment.Ns = {8, 16, 32, 64, 128, 256};
    c.experiment.regime = "linear_in_measure";
    c.experiment.assert_rate = true;
    out.push_back({c.name, "cost gap for coefficients linear in the measure", c});
  }
  {
    auto m = linear_model();
    m.T = 0.5;
    auto c = scenario("eta-orthogonality", m, two_atoms(), "eta");
    c.experiment.N = 64;
    c.experiment.reps = 10000;
    c.experiment.slope_tolerance = 0.3;
    c.experiment.assert_rate = true;
    out.push_back({c.name, "mean square of averaged fluctuations against 1/(N-1)", c});
  }
  {
    // Leader is a Brownian motion that feeds into the follower volatility.
    ModelConfig m;
    m.b = 1.0;
    m.T = 1.0;
    m.h = 0.005;
    m.params.s0 = 1.0;
    m.params.a1 = -0.5;
    m.params.s1 = 0.2;
    m.params.e1 = 1.0;
    m.leader_initial = "scaled_brownian";
    m.leader_sigma = 1.0;
    DelayConfig d;
    d.a = d.b = 0.5;
    auto c = scenario("holder-delay", m, d, "holder");
    c.experiment.deltas = {0.5, 0.52, 0.54, 0.58, 0.66, 0.82};
    c.experiment.reps = 400;
    c.experiment.K = 100;
    c.experiment.slope_tolerance = 0.2;
    c.experiment.expected_exponent = 1.0;
    c.experiment.assert_rate = true;
    out.push_back({c.name, "delay regularity of limit followers with a Brownian leader", c});
  }
  {
    auto m = base_model();
    m.T = 0.5;
    auto& p = m.params;
    p.a1 = -1.0;
    p.c1 = 0.5;
    p.k1 = 0.3;
    p.s1 = 0.4;
    p.q1 = p.r1 = 1.0;
    p.q0 = p.r0 = 1.0;
    p.b0 = p.b1 = 1.0;
    auto c = scenario("epsilon-nash", m, two_atoms(), "epsilon_nash");
    c.experiment.N = 16;
    c.experiment.reps = 200;
    dynamics::LinearFeedback zero, constant, push;
    constant.pc = 0.5;
    push.pd = 0.2;
    c.experiment.deviation_library = {zero, constant, push};
    c.experiment.leader_library = {zero, constant};
    c.experiment.kappa = 10.0;
    c.experiment.gamma = 10.0;
    c.experiment.epsilon_tolerance = 0.05;
    c.experiment.assert_rate = true;
    out.push_back({c.name, "epsilon-Nash certification of the zero-control profile", c});
  }
  return out;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> p = make_presets();
  return p;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw ValidationError("unknown preset '" + name + "'");
}

}  // namespace stackmf::cli
