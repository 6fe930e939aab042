#include <doctest.h>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "copd/checkpoint.hpp"
#include "copd/domains.hpp"
#include "copd/errors.hpp"
#include "copd/metrics_log.hpp"

#include "helpers.hpp"

using namespace copd;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("formats") {

TEST_CASE("checkpoints round-trip bit-exactly") {
  Policy p = Policy::zeros(task_vocab(), 6);
  p.params = testutil::random_params(p.params.size(), 1234, 3.0);
  p.params[0] = -0.0;
  p.params[1] = 1e-300;
  p.params[2] = -12345.6789;
  const fs::path path = temp_file("copd_ckpt_roundtrip.ckpt");
  save_checkpoint(p, path);
  const Policy q = load_checkpoint(path, task_vocab());
  CHECK(q.window == p.window);
  REQUIRE(q.params.size() == p.params.size());
  for (size_t i = 0; i < p.params.size(); ++i) {
    const auto a = std::bit_cast<std::uint64_t>(p.params[i]);
    const auto b = std::bit_cast<std::uint64_t>(q.params[i]);
    CHECK(a == b);
  }
  fs::remove(path);
}

TEST_CASE("checkpoint parent directories are created on demand") {
  const fs::path dir = fs::temp_directory_path() / "copd_nested_ckpt";
  fs::remove_all(dir);
  const fs::path path = dir / "a" / "b" / "model.ckpt";
  const Policy p = Policy::zeros(task_vocab(), 2);
  save_checkpoint(p, path);
  CHECK(fs::exists(path));
  fs::remove_all(dir);
}

TEST_CASE("corrupt or mismatched checkpoints are rejected") {
  const fs::path path = temp_file("copd_ckpt_bad.ckpt");

  SUBCASE("wrong magic") {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE1 13 6 1014\n";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path, task_vocab()), ConfigError);
  }
  SUBCASE("vocabulary mismatch") {
    const Policy p = Policy::zeros(Vocab{5, 0, 4}, 2);
    save_checkpoint(p, path);
    CHECK_THROWS_AS(load_checkpoint(path, task_vocab()), ConfigError);
  }
  SUBCASE("truncated payload") {
    const Policy p = Policy::zeros(task_vocab(), 2);
    save_checkpoint(p, path);
    fs::resize_file(path, fs::file_size(path) - 9);
    CHECK_THROWS_AS(load_checkpoint(path, task_vocab()), ConfigError);
  }
  SUBCASE("missing file") {
    fs::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path, task_vocab()), ConfigError);
  }
  fs::remove(path);
}

TEST_CASE("metrics files carry a schema header and replay row by row") {
  const fs::path path = temp_file("copd_metrics_roundtrip.jsonl");
  {
    MetricsWriter writer(path, {{"run", "t-1"}, {"seed", 1}});
    writer.row({{"metric", "train_step"}, {"step", 1}, {"reward", 0.5}});
    writer.row({{"metric", "pair_distance"}, {"step", 2}, {"mean_overlap", 0.75}});
    CHECK(writer.rows_written() == 2);
  }
  const MetricsFile file = read_metrics(path);
  CHECK(file.header.at("schema") == MetricsWriter::kSchema);
  CHECK(file.header.at("run") == "t-1");
  REQUIRE(file.rows.size() == 2);
  CHECK(file.rows[0].at("metric") == "train_step");
  CHECK(file.rows[1].at("mean_overlap") == 0.75);
  fs::remove(path);
}

TEST_CASE("metrics reader flags schema mismatches and broken lines") {
  const fs::path path = temp_file("copd_metrics_bad.jsonl");

  SUBCASE("wrong schema string") {
    std::ofstream out(path);
    out << R"({"schema":"other/9"})" << "\n";
    out.close();
    CHECK_THROWS_AS(read_metrics(path), ConfigError);
  }
  SUBCASE("broken json line reports its number") {
    std::ofstream out(path);
    out << R"({"schema":"copd-metrics/1"})" << "\n" << "{oops\n";
    out.close();
    try {
      read_metrics(path);
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
  }
  SUBCASE("an empty file reads as empty") {
    std::ofstream out(path);
    out.close();
    const MetricsFile file = read_metrics(path);
    CHECK(file.rows.empty());
  }
  fs::remove(path);
}

TEST_CASE("a rewritten metrics file truncates stale content") {
  const fs::path path = temp_file("copd_metrics_trunc.jsonl");
  {
    MetricsWriter writer(path, {{"run", "a"}});
    for (int i = 0; i < 10; ++i) writer.row({{"metric", "train_step"}, {"step", i}});
  }
  {
    MetricsWriter writer(path, {{"run", "b"}});
    writer.row({{"metric", "train_step"}, {"step", 0}});
  }
  const MetricsFile file = read_metrics(path);
  CHECK(file.header.at("run") == "b");
  CHECK(file.rows.size() == 1);
  fs::remove(path);
}

}  // TEST_SUITE
