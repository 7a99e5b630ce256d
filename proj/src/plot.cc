// Copyright 2026 The PueLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "puelab/error.h"
#include "puelab/lab.h"
#include "text_file.h"

namespace puelab {
namespace {

constexpr double kWidth = 760;
constexpr double kHeight = 520;
constexpr double kLeft = 80;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 60;

constexpr const char* kCsvHeader =
    "method,tag,epoch,utility_loss,privacy,flops_cumulative";

// Hue per method: DP red, FFT blue, LoRA green, anything else grey.
int method_hue(std::string_view method) {
  if (method == "dp") return 0;
  if (method == "fft") return 220;
  if (method == "lora") return 130;
  return -1;
}

std::string method_color(std::string_view method, double lightness) {
  char buf[48];
  const int hue = method_hue(method);
  if (hue < 0) {
    std::snprintf(buf, sizeof(buf), "hsl(0,0%%,%.0f%%)", lightness);
  } else {
    std::snprintf(buf, sizeof(buf), "hsl(%d,75%%,%.0f%%)", hue, lightness);
  }
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Range {
  double lo;
  double hi;
};

Range padded(double lo, double hi) {
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.06 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

void emit_tradeoff_plot(std::span<const TradeoffPoint> points,
                        const std::string& svg_path,
                        const std::string& csv_path) {
  if (points.empty()) throw ConfigError("tradeoff plot needs at least one point");

  // Curves keyed by run tag in first-appearance order, epoch-sorted.
  std::vector<std::string> tags;
  std::map<std::string, std::vector<TradeoffPoint>> curves;
  for (const auto& p : points) {
    if (!curves.count(p.tag)) tags.push_back(p.tag);
    curves[p.tag].push_back(p);
  }
  for (auto& [tag, curve] : curves) {
    std::stable_sort(curve.begin(), curve.end(),
                     [](const auto& a, const auto& b) { return a.epoch < b.epoch; });
  }

  double x_lo = points[0].utility_loss, x_hi = x_lo;
  double y_lo = points[0].privacy, y_hi = y_lo;
  double f_max = 0.0;
  for (const auto& p : points) {
    x_lo = std::min(x_lo, p.utility_loss);
    x_hi = std::max(x_hi, p.utility_loss);
    y_lo = std::min(y_lo, p.privacy);
    y_hi = std::max(y_hi, p.privacy);
    f_max = std::max(f_max, p.flops_cumulative);
  }
  const Range xr = padded(x_lo, x_hi);
  const Range yr = padded(y_lo, y_hi);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sy = [&](double y) {
    return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph;
  };
  // More cumulative compute is drawn darker.
  auto lightness = [&](double flops) {
    return f_max > 0 ? 78.0 - 48.0 * (flops / f_max) : 50.0;
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<defs>\n";
  for (const char* m : {"dp", "fft", "lora", "other"}) {
    svg << "<marker id=\"arrow-" << m
        << "\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"7\" "
           "markerHeight=\"7\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" "
           "fill=\""
        << method_color(m, 40) << "\"/></marker>\n";
  }
  svg << "</defs>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 5.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    svg << "<line x1=\"" << num(sx(xv)) << "\" y1=\"" << num(kTop + ph)
        << "\" x2=\"" << num(sx(xv)) << "\" y2=\"" << num(kTop + ph + 5)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(kTop + ph + 18)
        << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n"
        << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(sy(yv))
        << "\" x2=\"" << num(kLeft) << "\" y2=\"" << num(sy(yv))
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(sy(yv) + 4)
        << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15)
      << "\" text-anchor=\"middle\">utility loss (non-sensitive test loss, "
         "lower is better)</text>\n"
      << "<text transform=\"translate(20," << num(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">privacy (sensitive train "
         "loss, higher is better)</text>\n";

  int legend_row = 0;
  for (const auto& tag : tags) {
    const auto& curve = curves[tag];
    const std::string& method = curve.front().method;
    const std::string marker =
        method_hue(method) < 0 ? "other" : std::string(method);
    svg << "<g class=\"curve\" data-tag=\"" << xml_escape(tag) << "\">\n";
    for (std::size_t i = 1; i < curve.size(); ++i) {
      svg << "<line x1=\"" << num(sx(curve[i - 1].utility_loss)) << "\" y1=\""
          << num(sy(curve[i - 1].privacy)) << "\" x2=\""
          << num(sx(curve[i].utility_loss)) << "\" y2=\""
          << num(sy(curve[i].privacy)) << "\" stroke=\""
          << method_color(method, lightness(curve[i].flops_cumulative))
          << "\" stroke-width=\"1.5\" marker-end=\"url(#arrow-" << marker
          << ")\"/>\n";
    }
    for (const auto& p : curve) {
      svg << "<circle cx=\"" << num(sx(p.utility_loss)) << "\" cy=\""
          << num(sy(p.privacy)) << "\" r=\"3\" fill=\""
          << method_color(method, lightness(p.flops_cumulative))
          << "\"><title>" << xml_escape(tag) << " epoch " << p.epoch
          << "</title></circle>\n";
    }
    svg << "</g>\n";
    const double ly = kTop + 10 + 20 * legend_row++;
    svg << "<rect x=\"" << num(kWidth - kRight + 15) << "\" y=\"" << num(ly)
        << "\" width=\"12\" height=\"12\" fill=\"" << method_color(method, 45)
        << "\"/>\n<text x=\"" << num(kWidth - kRight + 33) << "\" y=\""
        << num(ly + 10) << "\">" << xml_escape(tag) << "</text>\n";
  }
  svg << "<text x=\"" << num(kWidth - kRight + 15) << "\" y=\""
      << num(kTop + 20 + 20 * legend_row)
      << "\" font-size=\"10\">darker = more FLOPs</text>\n"
      << "</svg>\n";

  std::ostringstream csv;
  csv << kCsvHeader << '\n';
  for (const auto& tag : tags) {
    for (const auto& p : curves[tag]) {
      csv << p.method << ',' << p.tag << ',' << p.epoch << ','
          << exact(p.utility_loss) << ',' << exact(p.privacy) << ','
          << exact(p.flops_cumulative) << '\n';
    }
  }
  internal::write_text_atomic(svg_path, svg.str());
  internal::write_text_atomic(csv_path, csv.str());
}

std::vector<TradeoffPoint> read_tradeoff_csv(const std::string& path) {
  std::istringstream in(internal::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ConfigError(path + ": unexpected tradeoff CSV header");
  }
  std::vector<TradeoffPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ConfigError(path + ": malformed row: " + line);
    TradeoffPoint p;
    p.method = f[0];
    p.tag = f[1];
    p.epoch = std::atoi(f[2].c_str());
    p.utility_loss = std::strtod(f[3].c_str(), nullptr);
    p.privacy = std::strtod(f[4].c_str(), nullptr);
    p.flops_cumulative = std::strtod(f[5].c_str(), nullptr);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace puelab
