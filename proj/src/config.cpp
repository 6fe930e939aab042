#include "copd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "copd/domains.hpp"
#include "copd/errors.hpp"

namespace copd {

namespace {

using nlohmann::json;

// Wraps one JSON object for strict consumption: every key must be claimed
// by a getter before done(), so typos surface as errors instead of
// silently falling back to defaults.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  const json* claim(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const char* key, T& out) {
    const json* v = claim(key);
    if (v == nullptr) return;
    extract(*v, key, out);
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key()))
        throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }
  }

  const std::string& path() const { return path_; }

 private:
  std::string at(const char* key) const { return path_ + "." + key; }

  void extract(const json& v, const char* key, double& out) const {
    if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
    out = v.get<double>();
  }
  void extract(const json& v, const char* key, int& out) const {
    if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    out = v.get<int>();
  }
  void extract(const json& v, const char* key, std::uint64_t& out) const {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<long long>() < 0))
      throw ConfigError(at(key) + ": expected a nonnegative integer");
    out = v.get<std::uint64_t>();
  }
  void extract(const json& v, const char* key, bool& out) const {
    if (!v.is_boolean()) throw ConfigError(at(key) + ": expected a boolean");
    out = v.get<bool>();
  }
  void extract(const json& v, const char* key, std::string& out) const {
    if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
    out = v.get<std::string>();
  }
  void extract(const json& v, const char* key, std::vector<double>& out) const {
    if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
    out.clear();
    for (const json& x : v) {
      if (!x.is_number()) throw ConfigError(at(key) + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Mode parse_mode(const std::string& s, const std::string& path) {
  if (s == "coevolve") return Mode::kCoevolve;
  if (s == "expert") return Mode::kExpert;
  if (s == "mixed-rlvr") return Mode::kMixedRlvr;
  if (s == "static-opd") return Mode::kStaticOpd;
  if (s == "mopd") return Mode::kMopd;
  throw ConfigError(path + ": unknown mode '" + s +
                    "' (coevolve, expert, mixed-rlvr, static-opd, mopd)");
}

Topology parse_topology(const std::string& s, const std::string& path) {
  if (s == "full-pairwise") return Topology::kFullPairwise;
  if (s == "hub-and-spoke") return Topology::kHubSpoke;
  throw ConfigError(path + ": unknown topology '" + s + "' (full-pairwise, hub-and-spoke)");
}

OpdLossForm parse_loss_form(const std::string& s, const std::string& path) {
  if (s == "delta") return OpdLossForm::kDelta;
  if (s == "full-kl") return OpdLossForm::kFullKl;
  throw ConfigError(path + ": unknown loss_form '" + s + "' (delta, full-kl)");
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kCoevolve: return "coevolve";
    case Mode::kExpert: return "expert";
    case Mode::kMixedRlvr: return "mixed-rlvr";
    case Mode::kStaticOpd: return "static-opd";
    case Mode::kMopd: return "mopd";
  }
  return "?";
}

std::string to_string(Topology topology) {
  return topology == Topology::kFullPairwise ? "full-pairwise" : "hub-and-spoke";
}

std::string to_string(OpdLossForm form) {
  return form == OpdLossForm::kDelta ? "delta" : "full-kl";
}

RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  StrictObject root(j, "config");
  root.read("schema_version", cfg.schema_version);
  if (cfg.schema_version != 1)
    throw ConfigError("config.schema_version: unsupported version " +
                      std::to_string(cfg.schema_version));
  root.read("seed", cfg.seed);
  root.read("out_dir", cfg.out_dir);
  root.read("window", cfg.window);

  if (const json* branches = root.claim("branches")) {
    if (!branches->is_array() || branches->empty())
      throw ConfigError("config.branches: expected a non-empty array");
    cfg.branches.clear();
    for (size_t i = 0; i < branches->size(); ++i) {
      StrictObject b((*branches)[i], "config.branches[" + std::to_string(i) + "]");
      BranchConfig bc;
      b.read("domain", bc.domain);
      b.read("beta", bc.beta);
      b.done();
      if (bc.domain.empty())
        throw ConfigError(b.path() + ".domain: required");
      cfg.branches.push_back(std::move(bc));
    }
  }

  if (const json* sched = root.claim("schedule")) {
    StrictObject s(*sched, "config.schedule");
    if (const json* mv = s.claim("mode")) {
      if (!mv->is_string()) throw ConfigError("config.schedule.mode: expected a string");
      cfg.schedule.mode = parse_mode(mv->get<std::string>(), "config.schedule.mode");
    }
    s.read("cycles", cfg.schedule.cycles);
    s.read("s_rl", cfg.schedule.rlvr_steps);
    s.read("s_opd", cfg.schedule.opd_steps);
    if (const json* tv = s.claim("topology")) {
      if (!tv->is_string()) throw ConfigError("config.schedule.topology: expected a string");
      cfg.schedule.topology =
          parse_topology(tv->get<std::string>(), "config.schedule.topology");
    }
    s.read("hub", cfg.schedule.hub);
    if (const json* dir = s.claim("direction")) {
      StrictObject d(*dir, "config.schedule.direction");
      d.read("teacher", cfg.schedule.direction_teacher);
      d.read("student", cfg.schedule.direction_student);
      d.done();
    }
    s.done();
  }

  if (const json* grpo = root.claim("grpo")) {
    StrictObject g(*grpo, "config.grpo");
    g.read("group_size", cfg.grpo.group_size);
    g.read("batch", cfg.grpo.batch);
    g.read("eps_low", cfg.grpo.bounds.eps_low);
    g.read("eps_high", cfg.grpo.bounds.eps_high);
    g.read("kl_coeff", cfg.grpo.kl_coeff);
    g.read("learning_rate", cfg.grpo.learning_rate);
    g.read("temperature", cfg.grpo.temperature);
    g.read("max_len", cfg.grpo.max_len);
    g.read("pass_filter", cfg.grpo.pass_filter);
    g.read("pass_filter_samples", cfg.grpo.pass_filter_samples);
    g.done();
  }

  if (const json* opd = root.claim("opd")) {
    StrictObject o(*opd, "config.opd");
    if (const json* fv = o.claim("loss_form")) {
      if (!fv->is_string()) throw ConfigError("config.opd.loss_form: expected a string");
      cfg.opd_loss_form = parse_loss_form(fv->get<std::string>(), "config.opd.loss_form");
    }
    o.done();
  }

  if (const json* metrics = root.claim("metrics")) {
    StrictObject m(*metrics, "config.metrics");
    m.read("k", cfg.metrics.k);
    m.read("probe_prompts", cfg.metrics.probe_prompts);
    m.read("probe_rollouts", cfg.metrics.probe_rollouts);
    m.read("every", cfg.metrics.every);
    m.done();
  }

  if (const json* merge = root.claim("merge")) {
    StrictObject m(*merge, "config.merge");
    m.read("weights", cfg.merge_weights);
    m.done();
  }

  if (const json* pilot = root.claim("pilot")) {
    StrictObject p(*pilot, "config.pilot");
    p.read("teacher_steps", cfg.pilot.teacher_steps);
    p.read("student_steps", cfg.pilot.student_steps);
    p.read("temperatures", cfg.pilot.temperatures);
    p.read("distill_steps", cfg.pilot.distill_steps);
    p.read("total_steps", cfg.pilot.total_steps);
    p.read("interval", cfg.pilot.interval);
    p.done();
  }

  root.done();
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

void validate(const RunConfig& cfg) {
  const int n = static_cast<int>(cfg.branches.size());
  if (n == 0) throw ConfigError("config.branches: at least one branch is required");
  if (cfg.window < 1) throw ConfigError("config.window: must be at least 1");
  if (cfg.out_dir.empty()) throw ConfigError("config.out_dir: must not be empty");
  for (int i = 0; i < n; ++i) {
    make_domain(cfg.branches[i].domain);  // throws for unknown ids
    if (cfg.branches[i].beta < 0.0)
      throw ConfigError("config.branches[" + std::to_string(i) + "].beta: must be nonnegative");
  }

  const ScheduleConfig& s = cfg.schedule;
  if (s.cycles < 1) throw ConfigError("config.schedule.cycles: must be at least 1");
  if (s.rlvr_steps < 0 || s.opd_steps < 0)
    throw ConfigError("config.schedule: s_rl and s_opd must be nonnegative");
  if (s.mode != Mode::kExpert && n < 2)
    throw ConfigError("config.schedule.mode: " + to_string(s.mode) +
                      " needs at least two branches");
  if (s.topology == Topology::kHubSpoke && (s.hub < 0 || s.hub >= n))
    throw ConfigError("config.schedule.hub: not a branch index");
  if (s.mode == Mode::kStaticOpd) {
    if (s.direction_teacher < 0 || s.direction_teacher >= n || s.direction_student < 0 ||
        s.direction_student >= n)
      throw ConfigError("config.schedule.direction: indices must name branches");
    if (s.direction_teacher == s.direction_student)
      throw ConfigError("config.schedule.direction: teacher and student must differ");
  }

  const GrpoConfig& g = cfg.grpo;
  if (g.group_size < 2) throw ConfigError("config.grpo.group_size: must be at least 2");
  if (g.batch < 1) throw ConfigError("config.grpo.batch: must be at least 1");
  try {
    g.bounds.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.grpo: ") + e.what());
  }
  if (g.kl_coeff < 0.0) throw ConfigError("config.grpo.kl_coeff: must be nonnegative");
  if (g.learning_rate < 0.0)
    throw ConfigError("config.grpo.learning_rate: must be nonnegative");
  if (!(g.temperature > 0.0)) throw ConfigError("config.grpo.temperature: must be positive");
  if (g.max_len < 1) throw ConfigError("config.grpo.max_len: must be at least 1");
  if (g.pass_filter && g.pass_filter_samples < 2)
    throw ConfigError("config.grpo.pass_filter_samples: must be at least 2");

  const MetricsConfig& m = cfg.metrics;
  if (m.k < 1 || m.k > task_vocab().size)
    throw ConfigError("config.metrics.k: must lie in [1, vocab size]");
  if (m.probe_prompts < 1 || m.probe_rollouts < 1)
    throw ConfigError("config.metrics: probe counts must be at least 1");
  if (m.every < 1) throw ConfigError("config.metrics.every: must be at least 1");

  if (!cfg.merge_weights.empty()) {
    if (static_cast<int>(cfg.merge_weights.size()) != n)
      throw ConfigError("config.merge.weights: needs one weight per branch");
    double sum = 0.0;
    for (double w : cfg.merge_weights) {
      if (w < 0.0) throw ConfigError("config.merge.weights: must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("config.merge.weights: must sum to 1");
  }

  const PilotConfig& p = cfg.pilot;
  if (p.teacher_steps < 0) throw ConfigError("config.pilot.teacher_steps: must be nonnegative");
  if (p.student_steps < 1) throw ConfigError("config.pilot.student_steps: must be at least 1");
  if (p.temperatures.empty())
    throw ConfigError("config.pilot.temperatures: must not be empty");
  for (double t : p.temperatures) {
    if (!(t > 0.0)) throw ConfigError("config.pilot.temperatures: must be positive");
  }
  if (p.distill_steps < 1) throw ConfigError("config.pilot.distill_steps: must be at least 1");
  if (p.total_steps < 1) throw ConfigError("config.pilot.total_steps: must be at least 1");
  if (p.interval < 1 || p.interval > p.total_steps)
    throw ConfigError("config.pilot.interval: must lie in [1, total_steps]");
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = cfg.schema_version;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["window"] = cfg.window;
  j["branches"] = nlohmann::json::array();
  for (const BranchConfig& b : cfg.branches)
    j["branches"].push_back({{"domain", b.domain}, {"beta", b.beta}});
  j["schedule"] = {{"mode", to_string(cfg.schedule.mode)},
                   {"cycles", cfg.schedule.cycles},
                   {"s_rl", cfg.schedule.rlvr_steps},
                   {"s_opd", cfg.schedule.opd_steps},
                   {"topology", to_string(cfg.schedule.topology)},
                   {"hub", cfg.schedule.hub},
                   {"direction",
                    {{"teacher", cfg.schedule.direction_teacher},
                     {"student", cfg.schedule.direction_student}}}};
  j["grpo"] = {{"group_size", cfg.grpo.group_size},
               {"batch", cfg.grpo.batch},
               {"eps_low", cfg.grpo.bounds.eps_low},
               {"eps_high", cfg.grpo.bounds.eps_high},
               {"kl_coeff", cfg.grpo.kl_coeff},
               {"learning_rate", cfg.grpo.learning_rate},
               {"temperature", cfg.grpo.temperature},
               {"max_len", cfg.grpo.max_len},
               {"pass_filter", cfg.grpo.pass_filter},
               {"pass_filter_samples", cfg.grpo.pass_filter_samples}};
  j["opd"] = {{"loss_form", to_string(cfg.opd_loss_form)}};
  j["metrics"] = {{"k", cfg.metrics.k},
                  {"probe_prompts", cfg.metrics.probe_prompts},
                  {"probe_rollouts", cfg.metrics.probe_rollouts},
                  {"every", cfg.metrics.every}};
  if (!cfg.merge_weights.empty()) j["merge"] = {{"weights", cfg.merge_weights}};
  j["pilot"] = {{"teacher_steps", cfg.pilot.teacher_steps},
                {"student_steps", cfg.pilot.student_steps},
                {"temperatures", cfg.pilot.temperatures},
                {"distill_steps", cfg.pilot.distill_steps},
                {"total_steps", cfg.pilot.total_steps},
                {"interval", cfg.pilot.interval}};
  return j;
}

}  // namespace copd
