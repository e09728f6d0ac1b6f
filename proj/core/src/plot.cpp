#include "resdob/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace resdob {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 180.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Summary {
  std::vector<double> mean, lo, hi;
};

Summary summarize(const PlotSeries& s) {
  std::size_t len = 0;
  for (const auto& r : s.runs) len = std::max(len, r.size());
  Summary out;
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    int n = 0;
    for (const auto& r : s.runs) {
      if (i >= r.size()) continue;
      sum += r[i];
      lo = std::min(lo, r[i]);
      hi = std::max(hi, r[i]);
      ++n;
    }
    out.mean.push_back(sum / n);
    out.lo.push_back(lo);
    out.hi.push_back(hi);
  }
  return out;
}

}  // namespace

Axis::Axis(double lo_, double hi_, double p0_, double p1_) : lo(lo_), hi(hi_), p0(p0_), p1(p1_) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

double Axis::map(double v) const { return p0 + (v - lo) / (hi - lo) * (p1 - p0); }

std::string render_svg(const std::string& title, const std::string& y_label,
                       const std::vector<PlotSeries>& series) {
  std::vector<Summary> sums;
  std::size_t len = 0;
  double ylo = std::numeric_limits<double>::infinity();
  double yhi = -ylo;
  for (const auto& s : series) {
    sums.push_back(summarize(s));
    const Summary& m = sums.back();
    len = std::max(len, m.mean.size());
    for (std::size_t i = 0; i < m.mean.size(); ++i) {
      if (!std::isfinite(m.lo[i]) || !std::isfinite(m.hi[i])) {
        throw std::invalid_argument("plot: non-finite value in series '" + s.label + "'");
      }
      ylo = std::min(ylo, m.lo[i]);
      yhi = std::max(yhi, m.hi[i]);
    }
  }
  if (len == 0) throw std::invalid_argument("plot: no data points");

  const Axis ax(0.0, static_cast<double>(len - 1), kLeft, kWidth - kRight);
  const Axis ay(ylo, yhi, kHeight - kBottom, kTop);

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
    << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
    << escape(title) << "</text>\n";

  // Axes and ticks.
  o << "<g stroke=\"black\" stroke-width=\"1\">\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight
    << "\" y2=\"" << kHeight - kBottom << "\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kHeight - kBottom << "\"/>\n</g>\n";
  o << "<g font-size=\"11\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = ay.lo + (ay.hi - ay.lo) * k / 4.0;
    const double xv = ax.lo + (ax.hi - ax.lo) * k / 4.0;
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(ay.map(yv) + 4)
      << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
    o << "<text x=\"" << num(ax.map(xv)) << "\" y=\"" << num(kHeight - kBottom + 16)
      << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
  }
  o << "</g>\n"
    << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 10)
    << "\" text-anchor=\"middle\" font-size=\"12\">iteration</text>\n"
    << "<text x=\"16\" y=\"" << num((kTop + kHeight - kBottom) / 2)
    << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << num((kTop + kHeight - kBottom) / 2) << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const Summary& m = sums[s];
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    if (m.mean.empty()) continue;
    o << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < m.hi.size(); ++i) {
      o << num(ax.map(static_cast<double>(i))) << ',' << num(ay.map(m.hi[i])) << ' ';
    }
    for (std::size_t i = m.lo.size(); i-- > 0;) {
      o << num(ax.map(static_cast<double>(i))) << ',' << num(ay.map(m.lo[i])) << ' ';
    }
    o << "\"/>\n";
    o << "<polyline class=\"mean\" data-label=\"" << escape(series[s].label) << "\" fill=\"none\" stroke=\""
      << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < m.mean.size(); ++i) {
      if (i) o << ' ';
      o << num(ax.map(static_cast<double>(i))) << ',' << num(ay.map(m.mean[i]));
    }
    o << "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(s);
    o << "<line x1=\"" << num(kWidth - kRight + 15) << "\" y1=\"" << num(ly) << "\" x2=\""
      << num(kWidth - kRight + 40) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n"
      << "<text class=\"legend\" x=\"" << num(kWidth - kRight + 46) << "\" y=\"" << num(ly + 4)
      << "\" font-size=\"12\">" << escape(series[s].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::string> plot_logs(const std::vector<RunLog>& logs, const std::string& out_dir) {
  if (logs.empty()) throw std::invalid_argument("plot: at least one run log is required");
  std::vector<std::string> order;
  std::map<std::string, PlotSeries> reward, cost;
  for (const RunLog& log : logs) {
    const std::string key = log.mode.empty() ? "run" : log.mode;
    if (!reward.count(key)) {
      order.push_back(key);
      reward[key].label = key;
      cost[key].label = key;
    }
    std::vector<double> r, c;
    for (const auto& rec : log.records) {
      r.push_back(rec.mean_episode_reward);
      c.push_back(rec.mean_episode_cost);
    }
    reward[key].runs.push_back(std::move(r));
    cost[key].runs.push_back(std::move(c));
  }
  std::vector<PlotSeries> rs, cs;
  for (const auto& k : order) {
    rs.push_back(reward[k]);
    cs.push_back(cost[k]);
  }
  const std::string task = logs.front().task;
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  for (const auto& [name, svg] :
       {std::pair{std::string("reward.svg"), render_svg(task + " rewards", "mean episode reward", rs)},
        std::pair{std::string("cost.svg"), render_svg(task + " costs", "mean episode cost", cs)}}) {
    const fs::path p = fs::path(out_dir) / name;
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << svg;
    written.push_back(p.string());
  }
  return written;
}

}  // namespace resdob
