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

#ifndef CCASHAP_ENSEMBLES_HPP_
#define CCASHAP_ENSEMBLES_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccashap/dataset.hpp"
#include "json.hpp"

namespace ccashap {

// Binary split on one indicator column: rows with value 0 go left. A node with
// column < 0 is a leaf carrying one score per class.
struct TreeNode {
  int column = -1;
  int left = -1;
  int right = -1;
  std::vector<double> scores;

  bool is_leaf() const { return column < 0; }
};

// Flat node array, root at index 0.
using Tree = std::vector<TreeNode>;

enum class EnsembleKind { kRandomForest, kGradientBoosting };

struct RandomForestParams {
  int n_trees = 200;
  int max_depth = 12;
  int min_leaf = 5;
  int feature_subsample = 0;  // columns tried per node; 0 means round(sqrt(J))
  std::uint64_t seed = 0;
  int threads = 1;
};

struct GradientBoostingParams {
  int n_rounds = 100;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_leaf = 5;
  double l2 = 1.0;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Additive tree model. The raw output for class c is
//   base_score[c] + tree_weight * sum over trees of leaf.scores[c].
// Random forests store class-probability leaves with tree_weight 1/T, so the
// raw output is the probability. Boosted models store per-class log-odds
// increments (one tree per class per round) and predict via softmax.
struct TreeEnsemble {
  EnsembleKind kind = EnsembleKind::kRandomForest;
  std::vector<Tree> trees;
  std::vector<std::string> classes;
  std::vector<std::string> variables;   // one per input block, input order
  std::vector<int> variable_sizes;      // indicator columns per variable
  std::vector<double> importances;      // normalized, or all zero if no split
  std::vector<std::string> columns;     // "Variable:Category" per input column
  Eigen::VectorXd base_score;
  double tree_weight = 1.0;
  bool degenerate = false;              // single observed class
  std::vector<double> training_loss;    // boosted: log-loss before/after rounds
  nlohmann::json hyperparams;

  Index width() const { return static_cast<Index>(columns.size()); }
  Index class_count() const { return static_cast<Index>(classes.size()); }
};

// `y` indexes `class_names`; the fitted model keeps only the classes that
// occur in `y`, in class_names order.
TreeEnsemble TrainRandomForest(const IndicatorMatrix& x, std::span<const int> y,
                               std::span<const std::string> class_names,
                               const RandomForestParams& params);

TreeEnsemble TrainGradientBoosting(const IndicatorMatrix& x, std::span<const int> y,
                                   std::span<const std::string> class_names,
                                   const GradientBoostingParams& params);

// Leaf reached by `x` in `tree`.
const TreeNode& Descend(const Tree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Additive output before any link function.
Eigen::VectorXd RawOutput(const TreeEnsemble& model,
                          const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Class probabilities over model.classes; throws ConfigError on width mismatch.
Eigen::VectorXd PredictProba(const TreeEnsemble& model,
                             const Eigen::Ref<const Eigen::RowVectorXd>& x);

int PredictClass(const TreeEnsemble& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

double LogLoss(const TreeEnsemble& model, const Eigen::MatrixXd& x,
               std::span<const int> y_model_classes);

nlohmann::json EnsembleToJson(const TreeEnsemble& model);
TreeEnsemble EnsembleFromJson(const nlohmann::json& json);

enum class ConsensusRule {
  kAveraged,           // averaged score above median in both families
  kPerFoldMajority,    // above median in at least ceil(folds/2) folds, both families
};

struct ScreeningParams {
  int folds = 5;
  RandomForestParams rf;
  GradientBoostingParams gb;
  ConsensusRule rule = ConsensusRule::kAveraged;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct VariableScreening {
  std::string name;
  double rf_score_mean = 0.0;
  double gb_score_mean = 0.0;
  std::vector<double> rf_fold_scores;
  std::vector<double> gb_fold_scores;
  bool selected = false;
};

struct ScreeningReport {
  std::vector<VariableScreening> variables;
  int fold_count = 0;
  std::uint64_t seed = 0;
  ConsensusRule rule = ConsensusRule::kAveraged;
  double rf_median = 0.0;
  double gb_median = 0.0;
  bool degenerate = false;  // a fold saw a single class

  std::vector<std::string> Selected() const;
};

nlohmann::json ScreeningReportToJson(const ScreeningReport& report);

// Stratified fold ids (per class, shuffled, dealt round-robin with a running
// offset so remainders spread across folds).
std::vector<int> StratifiedFolds(std::span<const int> y, int folds, std::uint64_t seed);

// Cross-validated two-family importance screening of every non-target variable.
ScreeningReport ConsensusSelect(const CategoricalDataset& ds, const std::string& target,
                                const ScreeningParams& params);

}  // namespace ccashap

#endif  // CCASHAP_ENSEMBLES_HPP_
