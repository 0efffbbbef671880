/*
 * Copyright 2026 The ccashap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ccashap/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "ccashap/csv.hpp"
#include "ccashap/errors.hpp"
#include "ccashap/pipeline.hpp"
#include "json.hpp"

namespace ccashap {
namespace fs = std::filesystem;
namespace {

std::string Escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

std::string F(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string ClassColor(const std::string& name) {
  if (name == "KA") return "#d62728";
  if (name == "BC") return "#1f77b4";
  if (name == "O") return "#2ca02c";
  return "#7f7f7f";
}

// Maps data ranges onto a plot box.
struct Frame {
  double x0, x1, y0, y1;          // data
  double left, right, top, bottom;  // pixels
  double X(double x) const { return left + (x - x0) / (x1 - x0) * (right - left); }
  double Y(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

void Widen(double& lo, double& hi, double pad) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double span = hi - lo;
  lo -= pad * span;
  hi += pad * span;
}

std::string Header(int width, int height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string Text(double x, double y, const std::string& text, const std::string& extra = "") {
  return "<text x=\"" + F(x) + "\" y=\"" + F(y) + "\"" + (extra.empty() ? "" : " " + extra) +
         ">" + Escape(text) + "</text>\n";
}

std::string Line(double x1, double y1, double x2, double y2, const std::string& style) {
  return "<line x1=\"" + F(x1) + "\" y1=\"" + F(y1) + "\" x2=\"" + F(x2) + "\" y2=\"" + F(y2) +
         "\" " + style + "/>\n";
}

std::vector<csv::Record> ReadTable(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing artifact " + path.string());
  auto table = csv::Parse(ReadFile(path));
  if (table.empty()) throw DataError("empty artifact " + path.string());
  return table;
}

std::size_t Column(const csv::Record& header, const std::string& name, const fs::path& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError(path.string() + " lacks column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

// Puts labels beside their markers, trying a few offsets so that labels
// neither overlap each other nor leave the canvas.
class LabelPlacer {
 public:
  LabelPlacer(double width, double height) : width_(width), height_(height) {}

  std::string Place(double px, double py, double r, const std::string& text, double font,
                    const std::string& extra) {
    const double w = 0.6 * font * static_cast<double>(text.size());
    struct Option {
      double x, y;
      bool end;
    };
    std::vector<Option> options = {{px + r + 3, py + font / 3, false},
                                   {px - r - 3, py + font / 3, true},
                                   {px + r, py - r - 3, false},
                                   {px + r, py + r + font, false}};
    for (int step = 1; step <= 4; ++step) {
      options.push_back({px + r + 3, py + font / 3 - step * (font + 2), false});
      options.push_back({px + r + 3, py + font / 3 + step * (font + 2), false});
    }
    const Option* chosen = nullptr;
    for (const auto& o : options) {
      const double x0 = o.end ? o.x - w : o.x;
      if (x0 < 2 || x0 + w > width_ - 2 || o.y - font < 2 || o.y > height_ - 2) continue;
      if (!chosen) chosen = &o;
      if (Free(x0, o.y - font, x0 + w, o.y)) {
        chosen = &o;
        break;
      }
    }
    if (!chosen) chosen = &options[0];
    const double x0 = chosen->end ? chosen->x - w : chosen->x;
    boxes_.push_back({x0, chosen->y - font, x0 + w, chosen->y});
    std::string attrs = "font-size=\"" + F(font) + "\"";
    if (chosen->end) attrs += " text-anchor=\"end\"";
    if (!extra.empty()) attrs += " " + extra;
    return Text(chosen->x, chosen->y, text, attrs);
  }

  void Reserve(double px, double py, double r) { boxes_.push_back({px - r, py - r, px + r, py + r}); }

 private:
  bool Free(double x0, double y0, double x1, double y1) const {
    for (const auto& b : boxes_) {
      if (x0 < b[2] && b[0] < x1 && y0 < b[3] && b[1] < y1) return false;
    }
    return true;
  }

  double width_, height_;
  std::vector<std::array<double, 4>> boxes_;
};

}  // namespace

std::string ElbowSvg(std::span<const ElbowPoint> points, int knee) {
  const int width = 640, height = 420;
  Frame fr{0, 0, 0, 0, 70, width - 30.0, 40, height - 60.0};
  fr.x0 = points.empty() ? 0 : points.front().k;
  fr.x1 = points.empty() ? 1 : points.back().k;
  fr.y0 = 0.0;
  fr.y1 = 1.0;
  for (const auto& p : points) fr.y1 = std::max(fr.y1, p.normalized_wcss);
  Widen(fr.x0, fr.x1, 0.05);
  std::string s = Header(width, height);
  s += Text(width / 2.0, 22, "Elbow: normalized WCSS by number of clusters",
            "text-anchor=\"middle\" font-size=\"14\"");
  s += Line(fr.left, fr.bottom, fr.right, fr.bottom, "stroke=\"black\"");
  s += Line(fr.left, fr.top, fr.left, fr.bottom, "stroke=\"black\"");
  for (const auto& p : points) {
    s += Line(fr.X(p.k), fr.bottom, fr.X(p.k), fr.bottom + 5, "stroke=\"black\"");
    s += Text(fr.X(p.k), fr.bottom + 18, std::to_string(p.k), "text-anchor=\"middle\"");
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = fr.y1 * t / 4.0;
    s += Line(fr.left - 5, fr.Y(v), fr.left, fr.Y(v), "stroke=\"black\"");
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    s += Text(fr.left - 8, fr.Y(v) + 4, buf, "text-anchor=\"end\"");
  }
  s += Text(width / 2.0, height - 20, "K", "text-anchor=\"middle\"");
  s += Text(18, height / 2.0, "Normalized WCSS",
            "text-anchor=\"middle\" transform=\"rotate(-90 18 " + F(height / 2.0) + ")\"");
  std::string path;
  for (const auto& p : points) {
    path += (path.empty() ? "" : " ") + F(fr.X(p.k)) + "," + F(fr.Y(p.normalized_wcss));
  }
  s += "<polyline points=\"" + path + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  for (const auto& p : points) {
    s += "<circle cx=\"" + F(fr.X(p.k)) + "\" cy=\"" + F(fr.Y(p.normalized_wcss)) +
         "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
  }
  for (const auto& p : points) {
    if (p.k != knee) continue;
    s += "<circle class=\"knee\" data-k=\"" + std::to_string(p.k) + "\" cx=\"" + F(fr.X(p.k)) +
         "\" cy=\"" + F(fr.Y(p.normalized_wcss)) +
         "\" r=\"8\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    s += Text(fr.X(p.k) + 10, fr.Y(p.normalized_wcss) - 10, "knee K=" + std::to_string(p.k),
              "fill=\"#d62728\"");
  }
  return s + "</svg>\n";
}

std::string BiplotSvg(std::span<const BiplotPoint> points, int cluster) {
  const int width = 640, height = 560;
  std::vector<const BiplotPoint*> centroids;
  for (const auto& p : points) {
    if (p.kind == "centroid") centroids.push_back(&p);
  }
  if (cluster < 1 || cluster > static_cast<int>(centroids.size())) {
    throw ConfigError("biplot cluster out of range");
  }
  // Categories go to the centroid whose direction they project onto most strongly.
  auto owner = [&](const BiplotPoint& p) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      const double norm = std::hypot(centroids[k]->x, centroids[k]->y);
      const double score = norm > 0 ? (p.x * centroids[k]->x + p.y * centroids[k]->y) / norm : 0.0;
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(k);
      }
    }
    return best_score > 0 ? best + 1 : 0;
  };
  Frame fr{0, 0, 0, 0, 50, width - 30.0, 50, height - 50.0};
  fr.x0 = fr.y0 = std::numeric_limits<double>::infinity();
  fr.x1 = fr.y1 = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    fr.x0 = std::min(fr.x0, p.x);
    fr.x1 = std::max(fr.x1, p.x);
    fr.y0 = std::min(fr.y0, p.y);
    fr.y1 = std::max(fr.y1, p.y);
  }
  Widen(fr.x0, fr.x1, 0.08);
  Widen(fr.y0, fr.y1, 0.08);
  std::string s = Header(width, height);
  s += Text(width / 2.0, 24, "Cluster " + std::to_string(cluster),
            "text-anchor=\"middle\" font-size=\"15\"");
  if (fr.y0 < 0 && fr.y1 > 0) {
    s += Line(fr.left, fr.Y(0), fr.right, fr.Y(0), "stroke=\"#cccccc\" stroke-dasharray=\"4 3\"");
  }
  if (fr.x0 < 0 && fr.x1 > 0) {
    s += Line(fr.X(0), fr.top, fr.X(0), fr.bottom, "stroke=\"#cccccc\" stroke-dasharray=\"4 3\"");
  }
  s += Text(fr.right, fr.bottom + 30, "Dim 1", "text-anchor=\"end\"");
  s += Text(fr.left - 30, fr.top - 10, "Dim 2");
  LabelPlacer labels(width, height);
  for (const auto& p : points) {
    const bool marked = p.kind != "category" || owner(p) == cluster;
    labels.Reserve(fr.X(p.x), fr.Y(p.y), marked ? 7 : 2.5);
  }
  for (const auto& p : points) {
    if (p.kind != "category") continue;
    const bool mine = owner(p) == cluster;
    s += "<circle class=\"category\" cx=\"" + F(fr.X(p.x)) + "\" cy=\"" + F(fr.Y(p.y)) +
         "\" r=\"" + (mine ? "4" : "2.5") + "\" fill=\"" + (mine ? "#444444" : "#dddddd") +
         "\"/>\n";
    if (mine) s += labels.Place(fr.X(p.x), fr.Y(p.y), 4, p.label, 11, "");
  }
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    const auto& c = *centroids[k];
    const bool mine = static_cast<int>(k) + 1 == cluster;
    const double x = fr.X(c.x), y = fr.Y(c.y), r = mine ? 7 : 4;
    s += "<rect class=\"centroid\" x=\"" + F(x - r) + "\" y=\"" + F(y - r) + "\" width=\"" +
         F(2 * r) + "\" height=\"" + F(2 * r) + "\" fill=\"" + (mine ? "#9467bd" : "#cccccc") +
         "\"/>\n";
    s += labels.Place(x, y, r, c.label, 12, mine ? "font-weight=\"bold\"" : "fill=\"#999999\"");
  }
  for (const auto& p : points) {
    if (p.kind != "supplementary") continue;
    const auto colon = p.label.rfind(':');
    const std::string cls = colon == std::string::npos ? p.label : p.label.substr(colon + 1);
    const double x = fr.X(p.x), y = fr.Y(p.y);
    s += "<polygon class=\"supplementary\" points=\"" + F(x) + "," + F(y - 7) + " " + F(x - 6) +
         "," + F(y + 5) + " " + F(x + 6) + "," + F(y + 5) + "\" fill=\"" + ClassColor(cls) +
         "\"/>\n";
    s += labels.Place(x, y, 7, p.label, 12, "fill=\"" + ClassColor(cls) + "\"");
  }
  return s + "</svg>\n";
}

std::string BeeswarmSvg(std::span<const std::string> features, std::span<const std::size_t> order,
                        std::span<const BeeswarmRow> rows, const std::string& title) {
  const double row_h = 44, radius = 2.5;
  const int width = 760;
  const int height = static_cast<int>(90 + row_h * static_cast<double>(order.size()) + 40);
  double extent = 0.0;
  for (const auto& r : rows) {
    for (double v : r.phi) extent = std::max(extent, std::abs(v));
  }
  if (!(extent > 0.0)) extent = 1.0;
  Frame fr{-extent * 1.05, extent * 1.05, 0, 1, 200, width - 30.0, 60, height - 50.0};
  std::string s = Header(width, height);
  s += Text(width / 2.0, 24, title, "text-anchor=\"middle\" font-size=\"15\"");
  s += Line(fr.X(0), fr.top - 10, fr.X(0), fr.bottom, "stroke=\"#999999\"");
  s += Line(fr.left, fr.bottom, fr.right, fr.bottom, "stroke=\"black\"");
  for (int t = -2; t <= 2; ++t) {
    const double v = extent * t / 2.0;
    s += Line(fr.X(v), fr.bottom, fr.X(v), fr.bottom + 5, "stroke=\"black\"");
    char buf[24];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    s += Text(fr.X(v), fr.bottom + 18, buf, "text-anchor=\"middle\"");
  }
  s += Text((fr.left + fr.right) / 2, fr.bottom + 36, "SHAP value (predicted class)",
            "text-anchor=\"middle\"");
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    const std::size_t f = order[slot];
    const double centre = fr.top + row_h * (static_cast<double>(slot) + 0.5);
    s += "<g class=\"feature\" data-feature=\"" + Escape(features[f]) + "\" data-rank=\"" +
         std::to_string(slot + 1) + "\">\n";
    s += Text(fr.left - 10, centre + 4, features[f], "text-anchor=\"end\"");
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return rows[a].phi[f] < rows[b].phi[f]; });
    // Greedy swarm: each dot takes the offset closest to the axis that does
    // not overlap an already placed neighbour.
    std::vector<std::pair<double, double>> placed;
    const double limit = row_h / 2 - radius;
    for (std::size_t i : idx) {
      const double x = fr.X(rows[i].phi[f]);
      double offset = 0.0;
      for (int step = 0;; ++step) {
        offset = (step % 2 == 1 ? 1 : -1) * ((step + 1) / 2) * radius * 1.6;
        if (std::abs(offset) > limit) {
          offset = std::clamp(offset, -limit, limit);
          break;
        }
        bool clear = true;
        for (auto it = placed.rbegin(); it != placed.rend() && x - it->first < 2 * radius; ++it) {
          if (std::hypot(x - it->first, offset - it->second) < 2 * radius) {
            clear = false;
            break;
          }
        }
        if (clear) break;
      }
      placed.emplace_back(x, offset);
      s += "<circle cx=\"" + F(x) + "\" cy=\"" + F(centre + offset) + "\" r=\"" + F(radius) +
           "\" fill=\"" + ClassColor(rows[i].predicted_class) + "\" fill-opacity=\"0.8\"/>\n";
    }
    s += "</g>\n";
  }
  double lx = fr.left;
  for (const char* cls : {"KA", "BC", "O"}) {
    s += "<circle cx=\"" + F(lx) + "\" cy=\"44\" r=\"5\" fill=\"" + ClassColor(cls) + "\"/>\n";
    s += Text(lx + 9, 48, cls);
    lx += 60;
  }
  return s + "</svg>\n";
}

std::vector<std::size_t> BeeswarmOrder(const std::string& shap_csv,
                                       std::span<const std::string> features,
                                       std::span<const std::string> classes, bool per_class) {
  const auto table = csv::Parse(shap_csv);
  const std::size_t m = features.size(), c = classes.size();
  if (table.empty() || table[0].size() != 2 + m * c) {
    throw DataError("SHAP CSV does not match its sidecar");
  }
  std::vector<double> mean(m, 0.0);
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& rec = table[r];
    const auto cls = static_cast<std::size_t>(
        std::find(classes.begin(), classes.end(), rec[1]) - classes.begin());
    for (std::size_t f = 0; f < m; ++f) {
      if (per_class) {
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) sum += std::abs(std::stod(rec[2 + f * c + k]));
        mean[f] += sum / static_cast<double>(c);
      } else {
        mean[f] += std::abs(std::stod(rec[2 + f * c + cls]));
      }
    }
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  return order;
}

std::vector<fs::path> RenderPlots(const fs::path& dir) {
  std::vector<fs::path> written;

  const auto elbow_path = dir / "elbow.csv";
  const auto elbow = ReadTable(elbow_path);
  const std::size_t ck = Column(elbow[0], "k", elbow_path);
  const std::size_t cw = Column(elbow[0], "normalized_wcss", elbow_path);
  const std::size_t cknee = Column(elbow[0], "knee", elbow_path);
  std::vector<ElbowPoint> points;
  int knee = 0;
  for (std::size_t r = 1; r < elbow.size(); ++r) {
    ElbowPoint p;
    p.k = std::stoi(elbow[r][ck]);
    p.normalized_wcss = std::stod(elbow[r][cw]);
    if (elbow[r][cknee] == "1") knee = p.k;
    points.push_back(p);
  }
  WriteFile(dir / "elbow.svg", ElbowSvg(points, knee));
  written.push_back(dir / "elbow.svg");

  const auto biplot_path = dir / "biplot.csv";
  const auto biplot = ReadTable(biplot_path);
  std::vector<BiplotPoint> bp;
  for (std::size_t r = 1; r < biplot.size(); ++r) {
    const auto& rec = biplot[r];
    if (rec.size() != 4) throw DataError(biplot_path.string() + ": malformed row", r + 1);
    bp.push_back({rec[0], rec[1], std::stod(rec[2]), std::stod(rec[3])});
  }
  const int k = static_cast<int>(
      std::count_if(bp.begin(), bp.end(), [](const auto& p) { return p.kind == "centroid"; }));
  for (int cluster = 1; cluster <= k; ++cluster) {
    const auto path = dir / ("cluster_" + std::to_string(cluster) + ".svg");
    WriteFile(path, BiplotSvg(bp, cluster));
    written.push_back(path);
  }

  for (int cluster = 1; cluster <= k; ++cluster) {
    const auto base = "shap_cluster_" + std::to_string(cluster);
    const auto csv_path = dir / (base + ".csv");
    const auto json_path = dir / (base + ".json");
    if (!fs::exists(csv_path) && !fs::exists(json_path)) continue;  // no target
    const auto text = ReadFile(csv_path);
    nlohmann::json side;
    try {
      side = nlohmann::json::parse(ReadFile(json_path));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(json_path.string() + ": " + e.what());
    }
    const auto features = side.at("feature_names").get<std::vector<std::string>>();
    const auto classes = side.at("classes").get<std::vector<std::string>>();
    const bool per_class = side.at("class_mode").get<std::string>() == "per-class";
    const auto order = BeeswarmOrder(text, features, classes, per_class);
    const auto table = csv::Parse(text);
    std::vector<BeeswarmRow> rows;
    const std::size_t c = classes.size();
    for (std::size_t r = 1; r < table.size(); ++r) {
      const auto& rec = table[r];
      const auto cls = static_cast<std::size_t>(
          std::find(classes.begin(), classes.end(), rec[1]) - classes.begin());
      BeeswarmRow row{rec[1], {}};
      for (std::size_t f = 0; f < features.size(); ++f) {
        row.phi.push_back(std::stod(rec[2 + f * c + cls]));
      }
      rows.push_back(std::move(row));
    }
    const auto path = dir / ("shap_" + std::to_string(cluster) + ".svg");
    WriteFile(path, BeeswarmSvg(features, order, rows, "SHAP values, cluster " +
                                                           std::to_string(cluster)));
    written.push_back(path);
  }
  return written;
}

}  // namespace ccashap
