// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "swimlane/errors.hpp"

namespace swimlane {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 70;

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    out.emplace_back(line.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

double number(const PlotRow& row, const std::string& key) {
  const auto it = row.find(key);
  if (it == row.end()) throw ValidationError("plot input has no column '" + key + "'");
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size() || !std::isfinite(v)) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("column '" + key + "' holds non-numeric value '" + it->second + "'");
  }
}

std::string label(const PlotRow& row) {
  auto get = [&](const char* k) {
    const auto it = row.find(k);
    return it == row.end() ? std::string() : it->second;
  };
  std::string s = get("mode");
  for (const char* k : {"strategy", "ratio", "n_envs"}) {
    const std::string v = get(k);
    if (!v.empty()) s += (s.empty() ? "" : " ") + v;
  }
  return s;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// A round axis maximum: 1, 2 or 5 times a power of ten.
double nice_max(double v) {
  if (!(v > 0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * p >= v) return m * p;
  }
  return 10.0 * p;
}

struct Canvas {
  std::string body;
  double ymax = 1;

  double plot_w() const { return kWidth - kLeft - kRight; }
  double plot_h() const { return kHeight - kTop - kBottom; }
  double y(double v) const { return kTop + plot_h() * (1.0 - v / ymax); }

  void axes(std::string_view title, std::string_view ylabel) {
    body += fmt::format(R"(<text x="{:.1f}" y="24" text-anchor="middle" font-size="16">{}</text>)", kWidth / 2,
                        escape(title));
    body += '\n';
    for (int i = 0; i <= 5; ++i) {
      const double v = ymax * i / 5.0;
      body += fmt::format(R"(<line x1="{:.1f}" y1="{:.1f}" x2="{:.1f}" y2="{:.1f}" stroke="#ddd"/>)", kLeft, y(v),
                          kWidth - kRight, y(v));
      body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="end" font-size="11">{:.4g}</text>)",
                          kLeft - 6, y(v) + 4, v);
      body += '\n';
    }
    body += fmt::format(R"(<line x1="{0:.1f}" y1="{1:.1f}" x2="{0:.1f}" y2="{2:.1f}" stroke="#000"/>)", kLeft, kTop,
                        kHeight - kBottom);
    body += fmt::format(R"(<line x1="{0:.1f}" y1="{2:.1f}" x2="{1:.1f}" y2="{2:.1f}" stroke="#000"/>)", kLeft,
                        kWidth - kRight, kHeight - kBottom);
    body += fmt::format(
        R"~(<text x="16" y="{:.1f}" transform="rotate(-90 16 {:.1f})" text-anchor="middle" font-size="12">{}</text>)~",
        kTop + plot_h() / 2, kTop + plot_h() / 2, escape(ylabel));
    body += '\n';
  }

  void xlabel(double x, std::string_view text) {
    body += fmt::format(R"~(<text x="{0:.1f}" y="{1:.1f}" text-anchor="end" font-size="10" transform="rotate(-35 {0:.1f} {1:.1f})">{2}</text>)~",
                        x, kHeight - kBottom + 14, escape(text));
    body += '\n';
  }

  void rect(double x, double w, double lo, double hi, std::string_view fill) {
    body += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="{}"/>)", x, y(hi), w,
                        y(lo) - y(hi), fill);
    body += '\n';
  }

  std::string finish() const {
    return fmt::format(
               R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}" font-family="sans-serif">)",
               kWidth, kHeight, kWidth, kHeight) +
           "\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n" + body + "</svg>\n";
  }
};

constexpr const char* kColors[] = {"#4477aa", "#ee6677", "#228833"};

}  // namespace

PlotKind parse_plot_kind(std::string_view s) {
  if (s == "throughput") return PlotKind::Throughput;
  if (s == "breakdown") return PlotKind::Breakdown;
  if (s == "scaling") return PlotKind::Scaling;
  throw ValidationError("unknown plot kind '" + std::string(s) + "' (throughput|breakdown|scaling)");
}

std::vector<PlotRow> parse_csv(std::string_view text) {
  std::vector<std::string> lines;
  for (const auto& l : split(text, '\n')) {
    std::string s = l;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (!s.empty()) lines.push_back(std::move(s));
  }
  if (lines.empty()) throw ValidationError("empty CSV");
  const auto header = split(lines[0], ',');
  std::vector<PlotRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != header.size()) {
      throw ValidationError(fmt::format("CSV line {} has {} cells, header has {}", i + 1, cells.size(), header.size()));
    }
    PlotRow row;
    for (std::size_t c = 0; c < cells.size(); ++c) row[header[c]] = cells[c];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<PlotRow> load_plot_rows(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.contains("rows") || !j["rows"].is_array()) {
      throw ValidationError(path + ": expected a JSON object with a \"rows\" array");
    }
    std::vector<PlotRow> rows;
    for (const auto& r : j["rows"]) {
      PlotRow row;
      for (const auto& [k, v] : r.items()) row[k] = v.is_string() ? v.get<std::string>() : v.dump();
      rows.push_back(std::move(row));
    }
    return rows;
  }
  return parse_csv(text);
}

std::string render_svg(const std::vector<PlotRow>& rows, PlotKind kind) {
  if (rows.empty()) throw ValidationError("nothing to plot");
  Canvas c;
  const double n = static_cast<double>(rows.size());
  const double slot = c.plot_w() / n;
  const double bar = slot * 0.6;

  if (kind == PlotKind::Throughput) {
    double top = 0;
    for (const auto& r : rows) top = std::max(top, number(r, "throughput"));
    c.ymax = nice_max(top);
    c.axes("Throughput", "transitions / s");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double x = kLeft + slot * static_cast<double>(i) + (slot - bar) / 2;
      c.rect(x, bar, 0, number(rows[i], "throughput"), kColors[0]);
      c.xlabel(x + bar / 2, label(rows[i]));
    }
  } else if (kind == PlotKind::Breakdown) {
    static const char* parts[] = {"rollout_time", "actor_time", "transfer_time"};
    double top = 0;
    for (const auto& r : rows) top = std::max(top, number(r, parts[0]) + number(r, parts[1]) + number(r, parts[2]));
    c.ymax = nice_max(top);
    c.axes("Stage time breakdown", "seconds per epoch");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double x = kLeft + slot * static_cast<double>(i) + (slot - bar) / 2;
      double base = 0;
      for (std::size_t p = 0; p < 3; ++p) {
        const double v = number(rows[i], parts[p]);
        c.rect(x, bar, base, base + v, kColors[p]);
        base += v;
      }
      c.xlabel(x + bar / 2, label(rows[i]));
    }
    for (std::size_t p = 0; p < 3; ++p) {
      const double lx = kWidth - kRight - 120, ly = kTop + 14.0 * static_cast<double>(p);
      c.body += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="10" height="10" fill="{}"/>)", lx, ly, kColors[p]);
      c.body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="11">{}</text>)", lx + 14, ly + 9,
                            std::string_view(parts[p]).substr(0, std::string_view(parts[p]).find('_')));
      c.body += '\n';
    }
  } else {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) pts.emplace_back(number(r, "n_envs"), number(r, "throughput"));
    std::stable_sort(pts.begin(), pts.end());
    double top = 0;
    for (const auto& p : pts) top = std::max(top, p.second);
    c.ymax = nice_max(top);
    c.axes("Scaling", "transitions / s");
    const double xmin = pts.front().first, xmax = pts.back().first;
    auto px = [&](double v) {
      return xmax > xmin ? kLeft + c.plot_w() * (v - xmin) / (xmax - xmin) : kLeft + c.plot_w() / 2;
    };
    std::string path;
    for (const auto& [xv, yv] : pts) {
      path += fmt::format("{}{:.1f},{:.1f}", path.empty() ? "" : " ", px(xv), c.y(yv));
      c.body += fmt::format(R"(<circle cx="{:.1f}" cy="{:.1f}" r="3" fill="{}"/>)", px(xv), c.y(yv), kColors[0]);
      c.body += '\n';
      c.xlabel(px(xv) + 4, fmt::format("{:g}", xv));
    }
    c.body += fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>)", path, kColors[0]);
    c.body += '\n';
  }
  return c.finish();
}

}  // namespace swimlane
