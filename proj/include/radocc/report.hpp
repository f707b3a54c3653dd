#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/png_io.hpp"

namespace radocc::report {

// ---------------------------------------------------------------------------
// CSV input

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }

  std::optional<double> number(std::size_t row, const std::string& col) const {
    const int c = column(col);
    if (c < 0 || static_cast<std::size_t>(c) >= rows[row].size() || rows[row][c].empty()) return std::nullopt;
    try {
      return std::stod(rows[row][c]);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  std::string text(std::size_t row, const std::string& col) const {
    const int c = column(col);
    if (c < 0 || static_cast<std::size_t>(c) >= rows[row].size()) return {};
    return rows[row][c];
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Reads a CSV with one header row; lines starting with '#' are skipped.
inline Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty())
      t.header = split_csv_line(line);
    else
      t.rows.push_back(split_csv_line(line));
  }
  return t;
}

// ---------------------------------------------------------------------------
// SVG charts

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

enum class ChartKind { line, bars };

struct Chart {
  std::string title, x_label, y_label;
  ChartKind kind = ChartKind::line;
  std::optional<double> y_min, y_max;
  std::vector<Series> series;
};

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

inline void write_svg(const std::filesystem::path& path, const Chart& chart) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  constexpr double W = 640, H = 400, L = 70, R = 160, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const auto& s : chart.series)
    for (auto [x, y] : s.points) {
      if (!any) {
        x0 = x1 = x;
        y0 = y1 = y;
        any = true;
      }
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (chart.y_min) y0 = *chart.y_min;
  if (chart.y_max) y1 = *chart.y_max;
  if (chart.kind == ChartKind::bars) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << svg_escape(chart.title)
      << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = y0 + (y1 - y0) * i / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << py(y) << "\" x2=\"" << W - R << "\" y2=\"" << py(y)
        << "\" stroke=\"#ddd\"/>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = x0 + (x1 - x0) * i / 5.0;
    out << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
      << svg_escape(chart.x_label) << "</text>\n";
  out << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << svg_escape(chart.y_label) << "</text>\n";

  const std::size_t ns = std::max<std::size_t>(1, chart.series.size());
  const double slot = (W - L - R) / (x1 - x0) * 0.8;
  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    const char* color = palette[si % 6];
    if (chart.kind == ChartKind::bars) {
      const double bw = slot / static_cast<double>(ns);
      for (auto [x, y] : s.points) {
        const double left = px(x) - slot / 2 + bw * static_cast<double>(si);
        const double top = py(std::max(y, y0));
        out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << bw << "\" height=\""
            << std::max(0.0, py(y0) - top) << "\" fill=\"" << color << "\"/>\n";
      }
    } else {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (auto [x, y] : s.points) out << px(x) << ',' << py(y) << ' ';
      out << "\"/>\n";
      for (auto [x, y] : s.points)
        out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = T + 16 + 18 * static_cast<double>(si);
    out << "<rect x=\"" << W - R + 12 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\"" << color
        << "\"/>\n";
    out << "<text x=\"" << W - R + 30 << "\" y=\"" << ly + 1 << "\">" << svg_escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Galleries

struct OverlayCounts {
  std::size_t hit = 0, penetration = 0, false_positive = 0, missed = 0;
};

/// Colours prediction outcomes over grey radar power. Green: predicted and in
/// lidar GT; yellow: predicted, absent from lidar GT but present in the oracle
/// (penetration); red: predicted but in neither; blue: lidar GT missed.
inline std::vector<std::uint8_t> overlay(const Raster& radar, const Raster& pred, const Raster& gt,
                                         const Raster* truth, OverlayCounts* counts = nullptr) {
  if (!radar.same_shape(pred) || !radar.same_shape(gt) || (truth && !radar.same_shape(*truth)))
    throw InvalidArgument("overlay: layer shapes differ");
  std::vector<std::uint8_t> rgb(radar.size() * 3);
  OverlayCounts c;
  for (std::size_t i = 0; i < radar.size(); ++i) {
    const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(radar.data()[i], 0.0f, 1.0f) * 200.0f));
    std::uint8_t px[3] = {g, g, g};
    const bool p = pred.data()[i] >= 0.5f, l = gt.data()[i] >= 0.5f, t = truth && truth->data()[i] >= 0.5f;
    auto set = [&](int r, int gg, int b) {
      px[0] = static_cast<std::uint8_t>(r);
      px[1] = static_cast<std::uint8_t>(gg);
      px[2] = static_cast<std::uint8_t>(b);
    };
    if (p && l) {
      set(40, 200, 40);
      ++c.hit;
    } else if (p && t) {
      set(255, 220, 0);
      ++c.penetration;
    } else if (p) {
      set(230, 30, 30);
      ++c.false_positive;
    } else if (l) {
      set(40, 90, 255);
      ++c.missed;
    }
    std::copy(px, px + 3, rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  if (counts) *counts = c;
  return rgb;
}

}  // namespace radocc::report
