#include "copd/plot_data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "copd/errors.hpp"
#include "copd/metrics_log.hpp"

namespace copd {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string cell(const json& row, const std::string& key) {
  if (!row.contains(key)) return "nan";
  const json& v = row[key];
  if (v.is_number()) return fmt(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string run_name(const MetricsFile& mf, const std::filesystem::path& path) {
  if (mf.header.contains("run") && mf.header["run"].is_string())
    return mf.header["run"].get<std::string>();
  return path.stem().string();
}

struct LoadedRun {
  std::string run;
  MetricsFile mf;
};

void write_filtered(std::ofstream& out, const std::vector<LoadedRun>& runs,
                    const std::string& metric, const std::vector<std::string>& columns) {
  out << "run";
  for (const std::string& c : columns) out << '\t' << c;
  out << '\n';
  for (const LoadedRun& r : runs) {
    for (const json& row : r.mf.rows) {
      if (!row.contains("metric") || row["metric"] != metric) continue;
      out << r.run;
      for (const std::string& c : columns) out << '\t' << cell(row, c);
      out << '\n';
    }
  }
}

// One row per run: schedule rhythm from the header, merged-model accuracy
// per domain plus the cross-domain mean from the final_eval records.
void write_rhythm_sweep(std::ofstream& out, const std::vector<LoadedRun>& runs) {
  std::vector<std::string> domains;
  for (const LoadedRun& r : runs) {
    for (const json& row : r.mf.rows) {
      if (row.value("metric", "") != "final_eval" || row.value("model", "") != "merged")
        continue;
      const std::string d = row.value("domain", "");
      if (!d.empty() && std::find(domains.begin(), domains.end(), d) == domains.end())
        domains.push_back(d);
    }
  }
  std::sort(domains.begin(), domains.end());
  out << "run\ts_rl\ts_opd\tratio";
  for (const std::string& d : domains) out << '\t' << d;
  out << "\tmean\n";
  for (const LoadedRun& r : runs) {
    std::map<std::string, double> acc;
    for (const json& row : r.mf.rows) {
      if (row.value("metric", "") != "final_eval" || row.value("model", "") != "merged")
        continue;
      acc[row.value("domain", "")] = row.value("value", 0.0);
    }
    if (acc.empty()) continue;
    const double s_rl = r.mf.header.value("s_rl", 0.0);
    const double s_opd = r.mf.header.value("s_opd", 0.0);
    out << r.run << '\t' << fmt(s_rl) << '\t' << fmt(s_opd) << '\t'
        << (s_opd > 0 ? fmt(s_rl / s_opd) : "inf");
    double sum = 0.0;
    for (const std::string& d : domains) {
      const auto it = acc.find(d);
      out << '\t' << (it == acc.end() ? "nan" : fmt(it->second));
      if (it != acc.end()) sum += it->second;
    }
    out << '\t' << fmt(sum / static_cast<double>(acc.size())) << '\n';
  }
}

// Per-domain training reward over time for a mixed-domain run; the columns
// are discovered from the records.
void write_seesaw(std::ofstream& out, const std::vector<LoadedRun>& runs) {
  std::set<std::string> reward_keys;
  for (const LoadedRun& r : runs) {
    for (const json& row : r.mf.rows) {
      if (row.value("metric", "") != "train_step") continue;
      for (auto it = row.begin(); it != row.end(); ++it) {
        if (it.key().rfind("reward_", 0) == 0) reward_keys.insert(it.key());
      }
    }
  }
  out << "run\tstep\tcycle";
  for (const std::string& k : reward_keys) out << '\t' << k;
  out << '\n';
  for (const LoadedRun& r : runs) {
    for (const json& row : r.mf.rows) {
      if (row.value("metric", "") != "train_step") continue;
      bool any = false;
      for (const std::string& k : reward_keys) any = any || row.contains(k);
      if (!any) continue;
      out << r.run << '\t' << cell(row, "step") << '\t' << cell(row, "cycle");
      for (const std::string& k : reward_keys) out << '\t' << cell(row, k);
      out << '\n';
    }
  }
}

}  // namespace

const std::vector<std::string>& plot_figure_ids() {
  static const std::vector<std::string> ids = {"overlap-gain", "drift", "overlap-timeseries",
                                               "kl-timeseries", "seesaw", "rhythm-sweep"};
  return ids;
}

std::filesystem::path write_plot_data(std::span<const std::filesystem::path> metrics_files,
                                      std::string_view figure,
                                      const std::filesystem::path& out_dir) {
  const auto& ids = plot_figure_ids();
  if (std::find(ids.begin(), ids.end(), figure) == ids.end()) {
    std::string known;
    for (const std::string& id : ids) known += (known.empty() ? "" : ", ") + id;
    throw ConfigError("unknown figure id '" + std::string(figure) + "' (known: " + known + ")");
  }
  if (metrics_files.empty()) throw ConfigError("plot-data needs at least one metrics file");

  std::vector<LoadedRun> runs;
  for (const auto& path : metrics_files) {
    MetricsFile mf = read_metrics(path);
    runs.push_back({run_name(mf, path), std::move(mf)});
  }

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out_path = out_dir / (std::string(figure) + ".tsv");
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open output file: " + out_path.string());

  if (figure == "overlap-gain") {
    write_filtered(out, runs, "pilot_overlap_gain",
                   {"variant", "temperature", "control", "overlap", "pre", "post", "gain", "se"});
  } else if (figure == "drift") {
    write_filtered(out, runs, "pilot_drift", {"branch", "step", "overlap", "sym_kl"});
  } else if (figure == "overlap-timeseries") {
    write_filtered(out, runs, "pair_distance",
                   {"step", "cycle", "phase", "branch_pair", "k", "mean_overlap"});
  } else if (figure == "kl-timeseries") {
    write_filtered(out, runs, "pair_distance",
                   {"step", "cycle", "phase", "branch_pair", "sym_kl"});
  } else if (figure == "seesaw") {
    write_seesaw(out, runs);
  } else {
    write_rhythm_sweep(out, runs);
  }
  out.flush();
  if (!out) throw NumericError("plot-data write failed: " + out_path.string());
  return out_path;
}

}  // namespace copd
