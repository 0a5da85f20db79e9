#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cpn::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_x = false;
};

/// Static line chart with markers and a legend.
std::string render(const Chart& chart, int width = 720, int height = 420);
void write(const std::filesystem::path& path, const Chart& chart);

}  // namespace cpn::svg
