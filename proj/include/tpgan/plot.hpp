#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tpgan {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart written as PNG. Non-finite points, and non-positive ones when
/// log_y is set, are skipped.
void line_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<Series>& series, bool log_y);

struct BarGroup {
  std::string label;
  /// One value per series name; NaN leaves a gap.
  std::vector<double> values;
};

/// Grouped bar chart written as PNG.
void bar_plot(const std::filesystem::path& path, const std::string& title, const std::string& y_label,
              const std::vector<std::string>& series_names, const std::vector<BarGroup>& groups);

}  // namespace tpgan
