#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace copd {

// Figures the plot-data exporter knows how to assemble.
const std::vector<std::string>& plot_figure_ids();

// Reads one or more metrics streams and writes <out_dir>/<figure>.tsv with
// a header row. Streams from multiple runs are distinguished by a leading
// `run` column. Returns the written path.
std::filesystem::path write_plot_data(std::span<const std::filesystem::path> metrics_files,
                                      std::string_view figure,
                                      const std::filesystem::path& out_dir);

}  // namespace copd
