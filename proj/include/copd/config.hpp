#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "copd/grpo.hpp"
#include "copd/opd.hpp"

namespace copd {

enum class Mode { kCoevolve, kExpert, kMixedRlvr, kStaticOpd, kMopd };
enum class Topology { kFullPairwise, kHubSpoke };

std::string to_string(Mode mode);
std::string to_string(Topology topology);
std::string to_string(OpdLossForm form);

struct BranchConfig {
  std::string domain;
  double beta = 1.0;
  friend bool operator==(const BranchConfig&, const BranchConfig&) = default;
};

struct ScheduleConfig {
  Mode mode = Mode::kCoevolve;
  int cycles = 4;
  int rlvr_steps = 15;  // steps of Phase I per cycle ("s_rl" in configs)
  int opd_steps = 10;   // steps of Phase II per cycle ("s_opd" in configs)
  Topology topology = Topology::kFullPairwise;
  int hub = 0;
  int direction_teacher = 0;  // static-opd only
  int direction_student = 1;
  friend bool operator==(const ScheduleConfig&, const ScheduleConfig&) = default;
};

struct GrpoConfig {
  int group_size = 8;
  int batch = 16;
  ClipBounds bounds;
  double kl_coeff = 0.0;
  double learning_rate = 0.05;
  double temperature = 1.0;
  int max_len = 4;
  bool pass_filter = false;
  int pass_filter_samples = 8;
  friend bool operator==(const GrpoConfig& a, const GrpoConfig& b) {
    return a.group_size == b.group_size && a.batch == b.batch &&
           a.bounds.eps_low == b.bounds.eps_low && a.bounds.eps_high == b.bounds.eps_high &&
           a.kl_coeff == b.kl_coeff && a.learning_rate == b.learning_rate &&
           a.temperature == b.temperature && a.max_len == b.max_len &&
           a.pass_filter == b.pass_filter && a.pass_filter_samples == b.pass_filter_samples;
  }
};

struct MetricsConfig {
  int k = 10;  // min(10, vocab - 1) for the shared task vocab
  int probe_prompts = 8;
  int probe_rollouts = 2;
  int every = 1;  // measure branch pairs every N steps
  friend bool operator==(const MetricsConfig&, const MetricsConfig&) = default;
};

struct PilotConfig {
  int teacher_steps = 1200;
  int student_steps = 300;
  std::vector<double> temperatures = {0.3, 0.6, 1.0, 1.5, 2.5};
  int distill_steps = 60;
  int total_steps = 400;  // drift pilot training budget per branch
  int interval = 50;      // drift pilot measurement spacing
  friend bool operator==(const PilotConfig&, const PilotConfig&) = default;
};

struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  int window = 6;
  std::vector<BranchConfig> branches;
  ScheduleConfig schedule;
  GrpoConfig grpo;
  OpdLossForm opd_loss_form = OpdLossForm::kDelta;
  MetricsConfig metrics;
  std::vector<double> merge_weights;  // empty = uniform
  PilotConfig pilot;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Strict parse: unknown keys anywhere are hard errors naming the offending
// path, wrong types likewise. Missing keys take the defaults above.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Semantic checks beyond shape: ranges, mode arity, weight normalization.
void validate(const RunConfig& cfg);

// Normalized form: every field materialized. parse(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace copd
