#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "copd/config.hpp"
#include "copd/errors.hpp"

using namespace copd;
using nlohmann::json;

namespace {

json minimal_config() {
  return json{{"schema_version", 1},
              {"seed", 5},
              {"out_dir", "/tmp/x"},
              {"branches", json::array({{{"domain", "modsum"}}, {{"domain", "parity"}}})},
              {"schedule", {{"mode", "coevolve"}, {"cycles", 2}, {"s_rl", 3}, {"s_opd", 2}}}};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("a minimal config parses with documented defaults") {
  const RunConfig cfg = parse_run_config(minimal_config());
  CHECK(cfg.seed == 5);
  CHECK(cfg.window == 6);
  CHECK(cfg.branches.size() == 2);
  CHECK(cfg.branches[0].domain == "modsum");
  CHECK(cfg.branches[0].beta == 1.0);
  CHECK(cfg.schedule.mode == Mode::kCoevolve);
  CHECK(cfg.schedule.topology == Topology::kFullPairwise);
  CHECK(cfg.grpo.group_size == 8);
  CHECK(cfg.grpo.batch == 16);
  CHECK(cfg.grpo.bounds.eps_low == 0.2);
  CHECK(cfg.grpo.bounds.eps_high == 0.28);
  CHECK(cfg.grpo.temperature == 1.0);
  CHECK(cfg.grpo.kl_coeff == 0.0);
  CHECK(cfg.opd_loss_form == OpdLossForm::kDelta);
  CHECK(cfg.metrics.k == 10);
  CHECK(cfg.merge_weights.empty());
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("unknown keys are hard errors naming the path") {
  json j = minimal_config();
  j["grpo"] = {{"group_sizee", 8}};
  try {
    parse_run_config(j);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("group_sizee") != std::string::npos);
  }
  json top = minimal_config();
  top["grop"] = json::object();
  CHECK_THROWS_AS(parse_run_config(top), ConfigError);
}

TEST_CASE("schema version is enforced") {
  json j = minimal_config();
  j["schema_version"] = 2;
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);
}

TEST_CASE("clip bound eps_low 1.5 is rejected before any compute") {
  // the parser itself range-checks bounds, naming the offending section
  json j = minimal_config();
  j["grpo"] = {{"eps_low", 1.5}};
  try {
    parse_run_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("eps_low") != std::string::npos);
  }
}

TEST_CASE("enum strings accept documented values and reject junk") {
  json j = minimal_config();
  j["schedule"]["mode"] = "mixed-rlvr";
  CHECK(parse_run_config(j).schedule.mode == Mode::kMixedRlvr);
  j["schedule"]["mode"] = "mopd";
  CHECK(parse_run_config(j).schedule.mode == Mode::kMopd);
  j["schedule"]["mode"] = "sgd";
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);
  j["schedule"]["mode"] = "";
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);

  json t = minimal_config();
  t["schedule"]["topology"] = "hub-and-spoke";
  CHECK(parse_run_config(t).schedule.topology == Topology::kHubSpoke);
  t["schedule"]["topology"] = "ring";
  CHECK_THROWS_AS(parse_run_config(t), ConfigError);

  json o = minimal_config();
  o["opd"] = {{"loss_form", "full-kl"}};
  CHECK(parse_run_config(o).opd_loss_form == OpdLossForm::kFullKl);
  o["opd"] = {{"loss_form", "l2"}};
  CHECK_THROWS_AS(parse_run_config(o), ConfigError);
}

TEST_CASE("validation guards the schedule and branch roster") {
  RunConfig cfg = parse_run_config(minimal_config());

  SUBCASE("coevolve needs two branches") {
    cfg.branches.resize(1);
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.schedule.mode = Mode::kExpert;
    CHECK_NOTHROW(validate(cfg));
  }
  SUBCASE("negative beta is rejected") {
    cfg.branches[0].beta = -0.5;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
  SUBCASE("unknown domain is rejected") {
    cfg.branches[0].domain = "sorting";
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
  SUBCASE("hub must reference a branch") {
    cfg.schedule.topology = Topology::kHubSpoke;
    cfg.schedule.hub = 7;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
  SUBCASE("static-opd direction must name two distinct branches") {
    cfg.schedule.mode = Mode::kStaticOpd;
    cfg.schedule.direction_teacher = 1;
    cfg.schedule.direction_student = 1;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.schedule.direction_student = 0;
    CHECK_NOTHROW(validate(cfg));
  }
  SUBCASE("group size below two is rejected") {
    cfg.grpo.group_size = 1;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
  SUBCASE("k must fit the vocabulary") {
    cfg.metrics.k = 14;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.metrics.k = 0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
  SUBCASE("drift interval cannot exceed the budget") {
    cfg.pilot.interval = cfg.pilot.total_steps + 1;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
}

TEST_CASE("merge weights must match branches, stay nonnegative, and sum to one") {
  RunConfig cfg = parse_run_config(minimal_config());
  cfg.merge_weights = {0.5, 0.5};
  CHECK_NOTHROW(validate(cfg));
  cfg.merge_weights = {0.7, 0.2};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.merge_weights = {1.5, -0.5};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.merge_weights = {1.0};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("configs survive a serialization round trip") {
  json j = minimal_config();
  j["window"] = 5;
  j["branches"][0]["beta"] = 0.25;
  j["schedule"]["topology"] = "hub-and-spoke";
  j["schedule"]["hub"] = 1;
  j["grpo"] = {{"group_size", 4}, {"batch", 8},    {"eps_low", 0.1},
               {"eps_high", 0.3}, {"kl_coeff", 0.01}, {"learning_rate", 0.2},
               {"temperature", 0.8}, {"max_len", 3},  {"pass_filter", true},
               {"pass_filter_samples", 4}};
  j["opd"] = {{"loss_form", "full-kl"}};
  j["metrics"] = {{"k", 3}, {"probe_prompts", 2}, {"probe_rollouts", 1}, {"every", 2}};
  j["merge"] = {{"weights", {0.25, 0.75}}};
  j["pilot"] = {{"teacher_steps", 10}, {"student_steps", 5},
                {"temperatures", {0.5, 1.5}}, {"distill_steps", 2},
                {"total_steps", 10}, {"interval", 5}};
  const RunConfig cfg = parse_run_config(j);
  CHECK(cfg.merge_weights == std::vector<double>{0.25, 0.75});
  const RunConfig again = parse_run_config(to_json(cfg));
  CHECK(again == cfg);
}

TEST_CASE("loading a file with broken json reports a config error") {
  const auto path = std::filesystem::temp_directory_path() / "copd_broken.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_run_config(path), ConfigError);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
