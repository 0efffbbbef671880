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

#ifndef CCASHAP_SHAP_HPP_
#define CCASHAP_SHAP_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccashap/ensembles.hpp"
#include "json.hpp"

namespace ccashap {

// Shapley players: each variable's one-hot block toggles as a unit.
struct FeatureGroup {
  std::string name;
  Index offset = 0;
  Index size = 0;
};

std::vector<FeatureGroup> GroupsOf(const TreeEnsemble& model);
std::vector<FeatureGroup> GroupsOf(const IndicatorMatrix& x);

// Reference rows for the interventional value function
//   v(S) = mean over background rows b of f(x_S, b_rest).
struct BackgroundSet {
  Eigen::MatrixXd rows;
  std::uint64_t seed = 0;
  std::vector<Index> source_rows;  // positions in the sampled-from matrix
};

// Up to `size` rows drawn without replacement (all rows when fewer), kept in
// source order.
BackgroundSet SampleBackground(const Eigen::MatrixXd& rows, Index size, std::uint64_t seed);

inline constexpr int kMaxShapPlayers = 20;

enum class ShapAlgorithm {
  // Per tree and background row, each reachable leaf contributes a closed-form
  // Shapley share to the variables its path separates. Exact.
  kTreePaths,
  // Brute-force evaluation of all 2^M coalitions through the value function.
  kCoalitions,
};

struct ShapValues {
  Eigen::MatrixXd phi;     // M x C
  Eigen::VectorXd base;    // v(empty set), per class
  Eigen::VectorXd output;  // v(all players) = raw model output at x
};

// Exact Shapley values of the model's raw (pre-link) output: probabilities for
// random forests, per-class log-odds margins for boosted models.
ShapValues ExactShap(const TreeEnsemble& model, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                     std::span<const FeatureGroup> groups, const BackgroundSet& bg,
                     ShapAlgorithm algorithm = ShapAlgorithm::kTreePaths);

enum class ClassMode { kPerClass, kPredictedClass };

struct ShapExplanation {
  std::vector<std::string> classes;
  std::vector<std::string> feature_names;   // group order
  Eigen::VectorXd base_values;
  std::vector<Eigen::MatrixXd> phi;         // per row, M x C
  std::vector<int> predicted_class;         // index into classes
  std::vector<Index> row_ids;
  ClassMode class_mode = ClassMode::kPredictedClass;
  std::vector<double> mean_abs;             // per feature, under class_mode
  std::vector<Index> feature_order;         // by mean_abs, descending
  std::string output_scale;                 // "probability" or "log-odds"
  Index background_size = 0;
  std::uint64_t background_seed = 0;
};

// Explains every row of `rows`; `row_ids` label them in the export. Rows are
// processed in parallel, each with a fixed summation order.
ShapExplanation ShapSummary(const TreeEnsemble& model, const Eigen::MatrixXd& rows,
                            std::span<const Index> row_ids, const BackgroundSet& bg,
                            ClassMode class_mode = ClassMode::kPredictedClass,
                            int threads = 1,
                            ShapAlgorithm algorithm = ShapAlgorithm::kTreePaths);

// row_id, predicted_class, then "<variable>:<class>" for every variable (group
// order) and class.
std::string FormatShapCsv(const ShapExplanation& explanation);
nlohmann::json ShapSidecar(const ShapExplanation& explanation);

}  // namespace ccashap

#endif  // CCASHAP_SHAP_HPP_
