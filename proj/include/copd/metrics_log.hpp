#pragma once

#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace copd {

// Append-only line-delimited JSON stream. The first record is a schema
// header; every later line is one metric record. Records carry logical
// time only (step, cycle, phase), never wall-clock time, so identical runs
// produce byte-identical files.
class MetricsWriter {
 public:
  static constexpr const char* kSchema = "copd-metrics/1";

  MetricsWriter(const std::filesystem::path& path, nlohmann::json header_fields);

  void row(nlohmann::json record);

  const std::filesystem::path& path() const { return path_; }
  long rows_written() const { return rows_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  long rows_ = 0;
};

struct MetricsFile {
  nlohmann::json header;
  std::vector<nlohmann::json> rows;
};

// Strict replay: malformed lines or a missing/foreign schema header are
// errors. A zero-byte file reads as no header and no rows.
MetricsFile read_metrics(const std::filesystem::path& path);

}  // namespace copd
