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

#ifndef CCASHAP_RENDER_HPP_
#define CCASHAP_RENDER_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ccashap/cca.hpp"

namespace ccashap {

// Normalized WCSS against K with the knee drawn as the one circle of class
// "knee" (data-k holds its K).
std::string ElbowSvg(std::span<const ElbowPoint> points, int knee);

struct BiplotPoint {
  std::string label;
  std::string kind;  // category, centroid or supplementary
  double x = 0.0;
  double y = 0.0;
};

// Biplot of one cluster (1-based). Categories projecting most strongly onto
// its centroid direction are labelled; supplementary points overlay.
std::string BiplotSvg(std::span<const BiplotPoint> points, int cluster);

struct BeeswarmRow {
  std::string predicted_class;
  std::vector<double> phi;  // per feature, for the predicted class
};

// One swarm per feature, top to bottom in `order`; dots colored by predicted
// class (KA red, BC blue, O green).
std::string BeeswarmSvg(std::span<const std::string> features, std::span<const std::size_t> order,
                        std::span<const BeeswarmRow> rows, const std::string& title);

// Feature order used by the beeswarm: mean |phi| descending, computed from
// the exported CSV under the sidecar's class mode. Stable on ties.
std::vector<std::size_t> BeeswarmOrder(const std::string& shap_csv,
                                       std::span<const std::string> features,
                                       std::span<const std::string> classes, bool per_class);

// Writes elbow.svg, cluster_<k>.svg and shap_<k>.svg next to the artifacts
// of `dir`; returns the files written. DataError names a missing artifact.
std::vector<std::filesystem::path> RenderPlots(const std::filesystem::path& dir);

}  // namespace ccashap

#endif  // CCASHAP_RENDER_HPP_
