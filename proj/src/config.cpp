#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "stackmf/cli.hpp"

namespace stackmf::cli {

using nlohmann::json;
using dynamics::CoefficientSet;
using dynamics::LinearFeedback;

namespace {

using Params = CoefficientSet::Params;

const std::vector<std::pair<const char*, double Params::*>>& param_fields() {
  static const std::vector<std::pair<const char*, double Params::*>> f{
      {"a0", &Params::a0},       {"c0", &Params::c0},
      {"b0", &Params::b0},       {"s0", &Params::s0},
      {"cs0", &Params::cs0},     {"a1", &Params::a1},
      {"c1", &Params::c1},       {"k1", &Params::k1},
      {"b1", &Params::b1},       {"w1", &Params::w1},
      {"beta", &Params::beta},   {"s1", &Params::s1},
      {"e1", &Params::e1},       {"cs1", &Params::cs1},
      {"cost0_const", &Params::cost0_const},
      {"q0", &Params::q0},       {"r0", &Params::r0},
      {"m0", &Params::m0},       {"qT0", &Params::qT0},
      {"mT0", &Params::mT0},     {"cost1_const", &Params::cost1_const},
      {"q1", &Params::q1},       {"r1", &Params::r1},
      {"m1", &Params::m1},       {"qT1", &Params::qT1},
      {"mT1", &Params::mT1}};
  return f;
}

const std::vector<std::pair<const char*, double LinearFeedback::*>>& feedback_fields() {
  static const std::vector<std::pair<const char*, double LinearFeedback::*>> f{
      {"px", &LinearFeedback::px},
      {"pz", &LinearFeedback::pz},
      {"pd", &LinearFeedback::pd},
      {"pc", &LinearFeedback::pc},
      {"pdelta", &LinearFeedback::pdelta}};
  return f;
}

json feedback_json(const LinearFeedback& v) {
  json j = json::object();
  for (const auto& [k, m] : feedback_fields()) j[k] = v.*m;
  return j;
}

// Infinite caps are written as null.
json cap_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

bool is_gap_kind(const std::string& k) {
  return k == "state_gap" || k == "cost_gap" || k == "w2_gap";
}

// Reads known keys, records type errors and unknown keys.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void keys(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    std::set<std::string> k(known.begin(), known.end());
    for (const auto& [key, value] : obj.items()) {
      if (!k.count(key)) errors_.push_back(path + key + ": unknown field");
    }
  }

  template <class T>
  void get(const json& obj, const char* key, T& out, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw json::type_error::create(302, "expected a number", nullptr);
      }
      out = it->template get<T>();
    } catch (const json::exception&) {
      errors_.push_back(path + key + ": wrong type (" + std::string(it->type_name()) + ")");
    }
  }

  void cap(const json& obj, const char* key, double& out, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (it->is_null()) {
      out = std::numeric_limits<double>::infinity();
      return;
    }
    get(obj, key, out, path);
  }

  bool object(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) return false;
    if (!it->is_object()) {
      errors_.push_back(path + key + ": expected an object");
      return false;
    }
    return true;
  }

  void feedback(const json& j, LinearFeedback& v, const std::string& path) {
    if (!j.is_object()) {
      errors_.push_back(path + ": expected an object");
      return;
    }
    keys(j, path + ".", {"px", "pz", "pd", "pc", "pdelta"});
    for (const auto& [k, m] : feedback_fields()) get(j, k, v.*m, path + ".");
  }

  void feedback_list(const json& obj, const char* key, std::vector<LinearFeedback>& out,
                     const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_array()) {
      errors_.push_back(path + key + ": expected an array");
      return;
    }
    out.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      LinearFeedback v;
      feedback((*it)[i], v, path + key + "[" + std::to_string(i) + "]");
      out.push_back(v);
    }
  }

 private:
  std::vector<std::string>& errors_;
};

ScenarioConfig from_json(const json& j, std::vector<std::string>& errors) {
  ScenarioConfig c;
  Reader r(errors);
  if (!j.is_object()) {
    errors.push_back("config: expected a JSON object");
    return c;
  }
  r.keys(j, "", {"name", "model", "delay", "policy", "experiment", "seed", "output_dir"});
  r.get(j, "name", c.name, "");
  r.get(j, "seed", c.seed, "");
  r.get(j, "output_dir", c.output_dir, "");

  if (r.object(j, "model", "")) {
    const auto& m = j["model"];
    auto& o = c.model;
    const std::string p = "model.";
    r.keys(m, p, {"n0", "n1", "d0", "d1", "p0", "p1", "b", "T", "h", "family", "params", "L",
                  "leader_initial", "follower_initial", "q"});
    r.get(m, "n0", o.n0, p);
    r.get(m, "n1", o.n1, p);
    o.d0 = o.p0 = o.n0;
    o.d1 = o.p1 = o.n1;
    r.get(m, "d0", o.d0, p);
    r.get(m, "d1", o.d1, p);
    r.get(m, "p0", o.p0, p);
    r.get(m, "p1", o.p1, p);
    r.get(m, "b", o.b, p);
    r.get(m, "T", o.T, p);
    r.get(m, "h", o.h, p);
    r.get(m, "family", o.family, p);
    r.get(m, "L", o.L, p);
    r.get(m, "q", o.q, p);
    if (r.object(m, "params", p)) {
      const auto& pj = m["params"];
      std::set<std::string> known;
      for (const auto& [k, f] : param_fields()) {
        known.insert(k);
        r.get(pj, k, o.params.*f, p + "params.");
      }
      for (const auto& [key, v] : pj.items()) {
        if (!known.count(key)) errors.push_back(p + "params." + key + ": unknown field");
      }
    }
    if (r.object(m, "leader_initial", p)) {
      const auto& l = m["leader_initial"];
      const std::string lp = p + "leader_initial.";
      r.keys(l, lp, {"family", "value", "sigma", "theta"});
      r.get(l, "family", o.leader_initial, lp);
      r.get(l, "value", o.leader_value, lp);
      r.get(l, "sigma", o.leader_sigma, lp);
      r.get(l, "theta", o.leader_theta, lp);
    }
    if (r.object(m, "follower_initial", p)) {
      const auto& f = m["follower_initial"];
      const std::string fp = p + "follower_initial.";
      r.keys(f, fp, {"family", "center", "spread"});
      r.get(f, "family", o.follower_initial, fp);
      r.get(f, "center", o.follower_center, fp);
      r.get(f, "spread", o.follower_spread, fp);
    }
  }

  if (r.object(j, "delay", "")) {
    const auto& d = j["delay"];
    const std::string p = "delay.";
    r.keys(d, p, {"kind", "a", "b", "rate", "atoms", "probs"});
    r.get(d, "kind", c.delay.kind, p);
    r.get(d, "a", c.delay.a, p);
    r.get(d, "b", c.delay.b, p);
    r.get(d, "rate", c.delay.rate, p);
    r.get(d, "atoms", c.delay.atoms, p);
    r.get(d, "probs", c.delay.probs, p);
  }

  if (r.object(j, "policy", "")) {
    const auto& pj = j["policy"];
    const std::string p = "policy.";
    r.keys(pj, p, {"leader", "follower", "deviator", "holder_l"});
    if (pj.contains("leader")) r.feedback(pj["leader"], c.policy.leader, p + "leader");
    if (pj.contains("follower")) r.feedback(pj["follower"], c.policy.follower, p + "follower");
    if (pj.contains("deviator") && !pj["deviator"].is_null()) {
      LinearFeedback v;
      r.feedback(pj["deviator"], v, p + "deviator");
      c.policy.deviator = v;
    }
    r.get(pj, "holder_l", c.policy.holder_l, p);
  }

  if (r.object(j, "experiment", "")) {
    const auto& e = j["experiment"];
    auto& o = c.experiment;
    const std::string p = "experiment.";
    r.keys(e, p, {"kind", "Ns", "N", "reps", "K", "tol", "max_iter", "damping",
                  "partition_level", "regime", "assert_rate", "slope_tolerance",
                  "upper_bound_only", "step", "deltas", "expected_exponent",
                  "deviation_library", "leader_library", "kappa", "gamma",
                  "epsilon_tolerance"});
    r.get(e, "kind", o.kind, p);
    r.get(e, "Ns", o.Ns, p);
    r.get(e, "N", o.N, p);
    r.get(e, "reps", o.reps, p);
    r.get(e, "K", o.K, p);
    r.get(e, "tol", o.tol, p);
    r.get(e, "max_iter", o.max_iter, p);
    r.get(e, "damping", o.damping, p);
    r.get(e, "partition_level", o.partition_level, p);
    r.get(e, "regime", o.regime, p);
    r.get(e, "assert_rate", o.assert_rate, p);
    r.get(e, "slope_tolerance", o.slope_tolerance, p);
    r.get(e, "upper_bound_only", o.upper_bound_only, p);
    r.get(e, "step", o.step, p);
    r.get(e, "deltas", o.deltas, p);
    r.get(e, "expected_exponent", o.expected_exponent, p);
    r.feedback_list(e, "deviation_library", o.deviation_library, p);
    r.feedback_list(e, "leader_library", o.leader_library, p);
    r.cap(e, "kappa", o.kappa, p);
    r.cap(e, "gamma", o.gamma, p);
    r.get(e, "epsilon_tolerance", o.epsilon_tolerance, p);
  }
  return c;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  // nlohmann reports the position one past the offending character.
  return {line, col > 1 ? col - 1 : col};
}

bool divides(double h, double x) {
  const double r = x / h;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : ValidationError([&] {
        std::string s = "invalid configuration:";
        for (const auto& v : violations) s += "\n  " + v;
        return s;
      }()),
      violations_(std::move(violations)) {}

std::string to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  const auto& m = c.model;
  json params = json::object();
  for (const auto& [k, f] : param_fields()) params[k] = m.params.*f;
  j["model"] = {{"n0", m.n0},
                {"n1", m.n1},
                {"d0", m.d0},
                {"d1", m.d1},
                {"p0", m.p0},
                {"p1", m.p1},
                {"b", m.b},
                {"T", m.T},
                {"h", m.h},
                {"family", m.family},
                {"params", params},
                {"L", m.L},
                {"leader_initial",
                 {{"family", m.leader_initial},
                  {"value", m.leader_value},
                  {"sigma", m.leader_sigma},
                  {"theta", m.leader_theta}}},
                {"follower_initial",
                 {{"family", m.follower_initial},
                  {"center", m.follower_center},
                  {"spread", m.follower_spread}}},
                {"q", m.q}};
  j["delay"] = {{"kind", c.delay.kind},   {"a", c.delay.a},         {"b", c.delay.b},
                {"rate", c.delay.rate},   {"atoms", c.delay.atoms}, {"probs", c.delay.probs}};
  j["policy"] = {{"leader", feedback_json(c.policy.leader)},
                 {"follower", feedback_json(c.policy.follower)},
                 {"deviator", c.policy.deviator ? feedback_json(*c.policy.deviator) : json(nullptr)},
                 {"holder_l", c.policy.holder_l}};
  const auto& e = c.experiment;
  json dev = json::array(), lead = json::array();
  for (const auto& v : e.deviation_library) dev.push_back(feedback_json(v));
  for (const auto& v : e.leader_library) lead.push_back(feedback_json(v));
  j["experiment"] = {{"kind", e.kind},
                     {"Ns", e.Ns},
                     {"N", e.N},
                     {"reps", e.reps},
                     {"K", e.K},
                     {"tol", e.tol},
                     {"max_iter", e.max_iter},
                     {"damping", e.damping},
                     {"partition_level", e.partition_level},
                     {"regime", e.regime},
                     {"assert_rate", e.assert_rate},
                     {"slope_tolerance", e.slope_tolerance},
                     {"upper_bound_only", e.upper_bound_only},
                     {"step", e.step},
                     {"deltas", e.deltas},
                     {"expected_exponent", e.expected_exponent},
                     {"deviation_library", dev},
                     {"leader_library", lead},
                     {"kappa", cap_json(e.kappa)},
                     {"gamma", cap_json(e.gamma)},
                     {"epsilon_tolerance", e.epsilon_tolerance}};
  return j.dump(2) + "\n";
}

std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> v;
  auto finite = [&](const std::string& field, double x) {
    if (!std::isfinite(x)) v.push_back(field + ": must be finite");
    return std::isfinite(x);
  };
  if (c.name.empty()) v.push_back("name: must not be empty");
  if (c.output_dir.empty()) v.push_back("output_dir: must not be empty");

  const auto& m = c.model;
  const auto& e = c.experiment;
  if (m.n0 < 1 || m.n0 > 16) v.push_back("model.n0: must lie in [1, 16]");
  if (m.n1 < 1 || m.n1 > 16) v.push_back("model.n1: must lie in [1, 16]");
  if (m.d0 != m.n0) v.push_back("model.d0: only diagonal noise with d0 = n0 is supported");
  if (m.d1 != m.n1) v.push_back("model.d1: only diagonal noise with d1 = n1 is supported");
  if (m.p0 != m.n0) v.push_back("model.p0: controls must have dimension p0 = n0");
  if (m.p1 != m.n1) v.push_back("model.p1: controls must have dimension p1 = n1");

  const bool grid_finite = finite("model.b", m.b) & finite("model.T", m.T) & finite("model.h", m.h);
  if (grid_finite) {
    bool ok = true;
    if (!(m.h > 0.0)) v.push_back("model.h: must be positive"), ok = false;
    if (!(m.T > 0.0)) v.push_back("model.T: must be positive"), ok = false;
    if (!(m.b >= 0.0)) v.push_back("model.b: must be >= 0"), ok = false;
    if (ok && !divides(m.h, m.b)) {
      v.push_back("model.h: step " + num(m.h) + " does not divide b = " + num(m.b));
    }
    if (ok && !divides(m.h, m.T)) {
      v.push_back("model.h: step " + num(m.h) + " does not divide T = " + num(m.T));
    }
  }

  bool params_finite = finite("model.L", m.L);
  for (const auto& [k, f] : param_fields()) {
    params_finite = finite(std::string("model.params.") + k, m.params.*f) && params_finite;
  }
  const std::set<std::string> families{"linear_quadratic", "linear_in_measure",
                                       "smooth_nonlinear"};
  if (!families.count(m.family)) {
    v.push_back("model.family: unknown coefficient family '" + m.family + "'");
  } else if (params_finite) {
    try {
      build_model(c);
    } catch (const Error& err) {
      v.push_back(std::string("model.L: ") + err.what());
    }
  }
  const std::set<std::string> leader_fams{"constant", "ou_path", "scaled_brownian"};
  if (!leader_fams.count(m.leader_initial)) {
    v.push_back("model.leader_initial.family: unknown family '" + m.leader_initial + "'");
  }
  finite("model.leader_initial.value", m.leader_value);
  if (finite("model.leader_initial.sigma", m.leader_sigma) && m.leader_sigma < 0.0) {
    v.push_back("model.leader_initial.sigma: must be >= 0");
  }
  if (finite("model.leader_initial.theta", m.leader_theta) && m.leader_initial == "ou_path" &&
      !(m.leader_theta > 0.0)) {
    v.push_back("model.leader_initial.theta: must be positive");
  }
  const std::set<std::string> follower_fams{"dirac", "gaussian", "bimodal", "uniform"};
  if (!follower_fams.count(m.follower_initial)) {
    v.push_back("model.follower_initial.family: unknown family '" + m.follower_initial + "'");
  }
  finite("model.follower_initial.center", m.follower_center);
  if (finite("model.follower_initial.spread", m.follower_spread) && m.follower_spread < 0.0) {
    v.push_back("model.follower_initial.spread: must be >= 0");
  }

  const std::set<std::string> kinds{"state_gap", "cost_gap",     "w2_gap", "empirical_rate",
                                    "eta",       "epsilon_nash", "holder"};
  const bool rate_kind = is_gap_kind(e.kind) || e.kind == "empirical_rate";
  if (finite("model.q", m.q)) {
    if (m.q < 2.0) {
      v.push_back("model.q: moment order must be >= 2");
    } else if (!(m.q > 4.0) && rate_kind && e.assert_rate) {
      v.push_back("model.q: rate assertions need initial moments of order q > 4 (got " +
                  num(m.q) + "); disable assert_rate to run with q <= 4");
    }
  }

  const std::set<std::string> delay_kinds{"degenerate", "discrete", "uniform",
                                          "truncated_exponential"};
  if (!delay_kinds.count(c.delay.kind)) {
    v.push_back("delay.kind: unknown delay law '" + c.delay.kind + "'");
  } else {
    try {
      const auto law = build_delay_law(c);
      if (grid_finite && law.upper() > m.b + 1e-12) {
        v.push_back("delay: delays up to " + num(law.upper()) +
                    " exceed the history window model.b = " + num(m.b));
      }
    } catch (const Error& err) {
      v.push_back(std::string("delay: ") + err.what());
    }
  }

  auto check_feedback = [&](const std::string& path, const LinearFeedback& f) {
    for (const auto& [k, mem] : feedback_fields()) finite(path + "." + k, f.*mem);
  };
  check_feedback("policy.leader", c.policy.leader);
  check_feedback("policy.follower", c.policy.follower);
  if (c.policy.deviator) check_feedback("policy.deviator", *c.policy.deviator);
  if (finite("policy.holder_l", c.policy.holder_l) && c.policy.holder_l < 0.0) {
    v.push_back("policy.holder_l: must be >= 0");
  }

  if (!kinds.count(e.kind)) v.push_back("experiment.kind: unknown experiment '" + e.kind + "'");
  try {
    rates::regime_from_string(e.regime);
  } catch (const Error&) {
    v.push_back("experiment.regime: unknown regime '" + e.regime + "'");
  }
  if (is_gap_kind(e.kind) || e.kind == "empirical_rate") {
    const std::size_t min_N = e.kind == "state_gap" || e.kind == "cost_gap" ? 4 : 2;
    if (e.Ns.size() < 3) v.push_back("experiment.Ns: need at least 3 values");
    for (std::size_t k = 0; k < e.Ns.size(); ++k) {
      if (k > 0 && e.Ns[k] <= e.Ns[k - 1]) {
        v.push_back("experiment.Ns: values must be strictly increasing");
        break;
      }
    }
    if (!e.Ns.empty() && e.Ns.front() < min_N) {
      v.push_back("experiment.Ns: smallest N must be >= " + std::to_string(min_N));
    }
    if (e.kind != "empirical_rate" && e.reps < 50) {
      v.push_back("experiment.reps: rate experiments need at least 50 replications");
    }
  }
  if (e.reps < 2) v.push_back("experiment.reps: need at least 2 replications");
  if (e.K < 100) v.push_back("experiment.K: need at least 100 particles per delay atom");
  if (finite("experiment.tol", e.tol) && !(e.tol > 0.0)) {
    v.push_back("experiment.tol: must be positive");
  }
  if (e.max_iter < 1) v.push_back("experiment.max_iter: must be >= 1");
  if (finite("experiment.damping", e.damping) && !(e.damping > 0.0 && e.damping <= 1.0)) {
    v.push_back("experiment.damping: must lie in (0, 1]");
  }
  if (finite("experiment.slope_tolerance", e.slope_tolerance) && !(e.slope_tolerance > 0.0)) {
    v.push_back("experiment.slope_tolerance: must be positive");
  }
  finite("experiment.expected_exponent", e.expected_exponent);
  if (e.kind == "eta") {
    if (e.N < 3) v.push_back("experiment.N: the eta check needs N >= 3");
    if (grid_finite && m.h > 0.0 && e.step > std::lround(m.T / m.h)) {
      v.push_back("experiment.step: past the horizon");
    }
    if (e.step < -1) v.push_back("experiment.step: must be >= 0, or -1 for the terminal step");
  }
  if (e.kind == "epsilon_nash") {
    if (e.N < 2 || e.N > 64) v.push_back("experiment.N: certification needs 2 <= N <= 64");
    if (e.deviation_library.empty()) v.push_back("experiment.deviation_library: must not be empty");
    for (std::size_t k = 0; k < e.deviation_library.size(); ++k) {
      check_feedback("experiment.deviation_library[" + std::to_string(k) + "]",
                     e.deviation_library[k]);
    }
    for (std::size_t k = 0; k < e.leader_library.size(); ++k) {
      check_feedback("experiment.leader_library[" + std::to_string(k) + "]", e.leader_library[k]);
    }
    if (!(e.kappa > 0.0)) v.push_back("experiment.kappa: must be positive");
    if (!(e.gamma > 0.0)) v.push_back("experiment.gamma: must be positive");
    if (finite("experiment.epsilon_tolerance", e.epsilon_tolerance) && e.epsilon_tolerance < 0.0) {
      v.push_back("experiment.epsilon_tolerance: must be >= 0");
    }
  }
  if (e.kind == "holder") {
    if (e.deltas.size() < 4) v.push_back("experiment.deltas: need at least 4 delays");
    for (double d : e.deltas) {
      if (!std::isfinite(d) || d < 0.0 || (grid_finite && d > m.b + 1e-12)) {
        v.push_back("experiment.deltas: delays must lie in [0, model.b]");
        break;
      }
    }
  }
  return v;
}

ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    const auto [line, col] = line_column(text, err.byte);
    throw ParseError("JSON parse error at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " + err.what(),
                     line, col);
  }
  std::vector<std::string> errors;
  auto cfg = from_json(j, errors);
  if (errors.empty()) errors = validate(cfg);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const ScenarioConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write config file " + path.string());
  out << to_json(cfg);
}

dynamics::ModelSpec build_model(const ScenarioConfig& cfg) {
  const auto& m = cfg.model;
  dynamics::ModelSpec spec;
  spec.n0 = m.n0;
  spec.n1 = m.n1;
  spec.q = m.q;
  spec.grid = dynamics::TimeGrid(m.b, m.T, m.h);
  CoefficientSet::Family fam = CoefficientSet::Family::linear_quadratic;
  if (m.family == "linear_in_measure") fam = CoefficientSet::Family::linear_in_measure;
  if (m.family == "smooth_nonlinear") fam = CoefficientSet::Family::smooth_nonlinear;
  spec.coefficients = CoefficientSet(fam, m.params, m.L);
  using LF = dynamics::LeaderInitialLaw::Family;
  spec.leader_initial.family = m.leader_initial == "ou_path"           ? LF::ou_path
                               : m.leader_initial == "scaled_brownian" ? LF::scaled_brownian
                                                                       : LF::constant;
  spec.leader_initial.value = m.leader_value;
  spec.leader_initial.sigma = m.leader_sigma;
  spec.leader_initial.theta = m.leader_theta;
  using FF = dynamics::FollowerInitialLaw::Family;
  spec.follower_initial.family = m.follower_initial == "gaussian"  ? FF::gaussian
                                 : m.follower_initial == "bimodal" ? FF::bimodal
                                 : m.follower_initial == "uniform" ? FF::uniform
                                                                   : FF::dirac;
  spec.follower_initial.center = m.follower_center;
  spec.follower_initial.spread = m.follower_spread;
  return spec;
}

dynamics::DelayLaw build_delay_law(const ScenarioConfig& cfg) {
  const auto& d = cfg.delay;
  if (d.kind == "degenerate") return dynamics::DelayLaw::degenerate(d.a);
  if (d.kind == "discrete") return dynamics::DelayLaw::discrete(d.atoms, d.probs);
  if (d.kind == "uniform") return dynamics::DelayLaw::uniform(d.a, d.b);
  if (d.kind == "truncated_exponential") {
    return dynamics::DelayLaw::truncated_exponential(d.rate, d.a, d.b);
  }
  throw ValidationError("unknown delay law '" + d.kind + "'");
}

dynamics::PolicySet build_policies(const ScenarioConfig& cfg) {
  dynamics::PolicySet p;
  p.leader = cfg.policy.leader;
  p.follower = cfg.policy.follower;
  p.deviator = cfg.policy.deviator;
  p.holder_l = cfg.policy.holder_l;
  return p;
}

std::uint64_t config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char ch : to_json(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace stackmf::cli
