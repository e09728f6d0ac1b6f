#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <regex>

#include "resdob/plot.hpp"

using namespace resdob;

namespace {

std::vector<double> polyline_y(const std::string& svg) {
  const auto pos = svg.find("class=\"mean\"");
  const auto start = svg.find("points=\"", pos) + 8;
  const std::string pts = svg.substr(start, svg.find('"', start) - start);
  std::vector<double> ys;
  const std::regex pair(R"(([-0-9.]+),([-0-9.]+))");
  for (auto it = std::sregex_iterator(pts.begin(), pts.end(), pair); it != std::sregex_iterator(); ++it) {
    ys.push_back(std::stod((*it)[2]));
  }
  return ys;
}

}  // namespace

TEST(Plot, AxisMapsEndpointsAndWidensFlatRange) {
  const Axis a(2.0, 4.0, 10.0, 30.0);
  EXPECT_DOUBLE_EQ(a.map(2.0), 10.0);
  EXPECT_DOUBLE_EQ(a.map(4.0), 30.0);
  const Axis flat(1.0, 1.0, 0.0, 10.0);
  EXPECT_DOUBLE_EQ(flat.map(1.0), 5.0);
}

TEST(Plot, SinglePointIsWellFormed) {
  const std::string svg = render_svg("t", "y", {PlotSeries{"cbf", {{3.0}}}});
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
}

TEST(Plot, LegendNamesEverySeries) {
  const std::string svg =
      render_svg("t", "y", {PlotSeries{"cbf", {{1, 2}, {2, 3}}}, PlotSeries{"res_dob_cbf", {{0, 1}}}});
  EXPECT_NE(svg.find(">cbf</text>"), std::string::npos);
  EXPECT_NE(svg.find(">res_dob_cbf</text>"), std::string::npos);
}

TEST(Plot, IncreasingDataRisesOnScreen) {
  const std::vector<double> ys = polyline_y(render_svg("t", "y", {PlotSeries{"a", {{0, 1, 2, 4, 8}}}}));
  ASSERT_EQ(ys.size(), 5u);
  for (std::size_t i = 1; i < ys.size(); ++i) EXPECT_LT(ys[i], ys[i - 1]);
}

TEST(Plot, EscapesAndRejectsBadInput) {
  EXPECT_NE(render_svg("a<b & c", "y", {PlotSeries{"s", {{1.0}}}}).find("a&lt;b &amp; c"), std::string::npos);
  EXPECT_THROW(render_svg("t", "y", {}), std::invalid_argument);
  EXPECT_THROW(render_svg("t", "y", {PlotSeries{"s", {{1.0, std::nan("")}}}}), std::invalid_argument);
}

TEST(Plot, WritesRewardAndCostFiles) {
  RunLog a, b;
  a.mode = "cbf";
  b.mode = "none";
  a.task = b.task = "goal1-point";
  for (int i = 0; i < 3; ++i) {
    IterationRecord r;
    r.iteration = i;
    r.mean_episode_reward = i;
    a.append(r);
    b.append(r);
  }
  const auto dir = std::filesystem::temp_directory_path() / "resdob_plot_test";
  std::filesystem::remove_all(dir);
  const auto paths = plot_logs({a, b}, dir.string());
  ASSERT_EQ(paths.size(), 2u);
  for (const auto& p : paths) EXPECT_GT(std::filesystem::file_size(p), 100u);
  std::filesystem::remove_all(dir);
}
