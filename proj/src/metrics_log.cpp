#include "copd/metrics_log.hpp"

#include <string>

#include "copd/errors.hpp"

namespace copd {

MetricsWriter::MetricsWriter(const std::filesystem::path& path,
                             nlohmann::json header_fields)
    : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw ConfigError("cannot open metrics file for writing: " + path.string());
  header_fields["schema"] = kSchema;
  out_ << header_fields.dump() << '\n';
  out_.flush();
}

void MetricsWriter::row(nlohmann::json record) {
  out_ << record.dump() << '\n';
  // Flushed per row so an aborted run still leaves a replayable prefix.
  out_.flush();
  if (!out_) throw NumericError("metrics write failed: " + path_.string());
  ++rows_;
}

MetricsFile read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file: " + path.string());
  MetricsFile mf;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": malformed metrics line: " + e.what());
    }
    if (lineno == 1) {
      if (!j.contains("schema") || j["schema"] != MetricsWriter::kSchema)
        throw ConfigError(path.string() + ": missing or unsupported metrics schema header");
      mf.header = std::move(j);
    } else {
      mf.rows.push_back(std::move(j));
    }
  }
  return mf;
}

}  // namespace copd
