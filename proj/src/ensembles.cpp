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

#include "ccashap/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccashap/errors.hpp"
#include "ccashap/parallel.hpp"
#include "ccashap/random.hpp"

namespace ccashap {
namespace {

constexpr double kMinGain = 1e-12;

// Training rows in a canonical order (sorted by active columns, then label),
// so a fitted model depends only on the multiset of (x, y) pairs.
struct TrainingView {
  Index width = 0;
  int classes = 0;
  std::vector<std::vector<int>> active;  // nonzero columns per row
  std::vector<std::uint8_t> dense;       // row-major 0/1
  std::vector<int> y;                    // model class index

  bool Has(int row, int column) const {
    return dense[static_cast<std::size_t>(row) * width + column] != 0;
  }
  int rows() const { return static_cast<int>(y.size()); }
};

struct ClassMap {
  std::vector<std::string> names;
  std::vector<int> to_model;  // global class index -> model index, -1 if absent
};

ClassMap MapClasses(std::span<const int> y, std::span<const std::string> class_names) {
  std::vector<bool> present(class_names.size(), false);
  for (int label : y) {
    if (label < 0 || label >= static_cast<int>(class_names.size())) {
      throw ConfigError("class label " + std::to_string(label) + " out of range");
    }
    present[label] = true;
  }
  ClassMap map;
  map.to_model.assign(class_names.size(), -1);
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (present[c]) {
      map.to_model[c] = static_cast<int>(map.names.size());
      map.names.push_back(class_names[c]);
    }
  }
  return map;
}

TrainingView Canonicalize(const Eigen::MatrixXd& x, std::span<const int> y,
                          const ClassMap& classes) {
  const Index n = x.rows();
  std::vector<std::vector<int>> active(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (x(i, j) != 0.0) active[i].push_back(static_cast<int>(j));
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (active[a] != active[b]) return active[a] < active[b];
    return y[a] < y[b];
  });
  TrainingView view;
  view.width = x.cols();
  view.classes = static_cast<int>(classes.names.size());
  view.dense.assign(static_cast<std::size_t>(n * x.cols()), 0);
  for (Index r = 0; r < n; ++r) {
    const int src = order[r];
    for (int j : active[src]) view.dense[static_cast<std::size_t>(r * x.cols() + j)] = 1;
    view.active.push_back(std::move(active[src]));
    view.y.push_back(classes.to_model[y[src]]);
  }
  return view;
}

void CheckInputs(const IndicatorMatrix& x, std::span<const int> y) {
  if (x.rows() != static_cast<Index>(y.size())) {
    throw ConfigError("feature rows and label count differ");
  }
  if (x.rows() < 2) throw ConfigError("at least two observations are required");
}

TreeEnsemble MakeShell(const IndicatorMatrix& x, const ClassMap& classes,
                       EnsembleKind kind) {
  TreeEnsemble model;
  model.kind = kind;
  model.classes = classes.names;
  model.columns = x.ColumnLabels();
  for (const auto& b : x.blocks) {
    model.variables.push_back(b.name);
    model.variable_sizes.push_back(static_cast<int>(b.size));
  }
  model.importances.assign(x.blocks.size(), 0.0);
  return model;
}

// Sums column importances over each variable's block and normalizes to 1.
void AggregateImportances(const IndicatorMatrix& x, const std::vector<double>& by_column,
                          TreeEnsemble& model) {
  double total = 0.0;
  for (std::size_t b = 0; b < x.blocks.size(); ++b) {
    double sum = 0.0;
    for (Index j = 0; j < x.blocks[b].size; ++j) sum += by_column[x.blocks[b].offset + j];
    model.importances[b] = sum;
    total += sum;
  }
  if (total > 0.0) {
    for (auto& v : model.importances) v /= total;
  }
}

double Gini(const std::vector<double>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (double c : counts) sum_sq += (c / total) * (c / total);
  return 1.0 - sum_sq;
}

class ForestTreeBuilder {
 public:
  ForestTreeBuilder(const TrainingView& data, const RandomForestParams& params,
                    int candidates, double sample_total, Rng rng)
      : data_(data),
        params_(params),
        candidates_(candidates),
        sample_total_(sample_total),
        rng_(std::move(rng)),
        importance_(static_cast<std::size_t>(data.width), 0.0),
        column_order_(static_cast<std::size_t>(data.width)) {
    std::iota(column_order_.begin(), column_order_.end(), 0);
  }

  Tree Build(std::vector<int> samples) {
    Grow(samples, 0);
    return std::move(tree_);
  }

  const std::vector<double>& importance() const { return importance_; }

 private:
  int Grow(const std::vector<int>& samples, int depth) {
    const int C = data_.classes;
    const int node = static_cast<int>(tree_.size());
    tree_.emplace_back();
    std::vector<double> counts(C, 0.0);
    for (int s : samples) counts[data_.y[s]] += 1.0;
    const double total = static_cast<double>(samples.size());

    const bool pure =
        std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    int best_column = -1;
    if (!pure && depth < params_.max_depth && total >= 2.0 * params_.min_leaf) {
      best_column = ChooseSplit(samples, counts, total);
    }
    if (best_column < 0) {
      for (auto& c : counts) c /= total;
      tree_[node].scores = std::move(counts);
      return node;
    }
    std::vector<int> left, right;
    for (int s : samples) (data_.Has(s, best_column) ? right : left).push_back(s);
    const int l = Grow(left, depth + 1);
    const int r = Grow(right, depth + 1);
    tree_[node].column = best_column;
    tree_[node].left = l;
    tree_[node].right = r;
    return node;
  }

  int ChooseSplit(const std::vector<int>& samples, const std::vector<double>& counts,
                  double total) {
    const int C = data_.classes;
    std::vector<double> on(static_cast<std::size_t>(data_.width) * C, 0.0);
    std::vector<double> on_total(static_cast<std::size_t>(data_.width), 0.0);
    for (int s : samples) {
      for (int j : data_.active[s]) {
        on[static_cast<std::size_t>(j) * C + data_.y[s]] += 1.0;
        on_total[j] += 1.0;
      }
    }
    // Partial Fisher-Yates draws the candidate columns for this node.
    const int width = static_cast<int>(data_.width);
    for (int i = 0; i < candidates_; ++i) {
      const int pick = i + static_cast<int>(UniformIndex(rng_, width - i));
      std::swap(column_order_[i], column_order_[pick]);
    }
    const double parent = total * Gini(counts, total);
    double best_gain = kMinGain;
    int best = -1;
    std::vector<double> right(C), left(C);
    for (int i = 0; i < candidates_; ++i) {
      const int j = column_order_[i];
      const double n_right = on_total[j];
      const double n_left = total - n_right;
      if (n_right < params_.min_leaf || n_left < params_.min_leaf) continue;
      for (int c = 0; c < C; ++c) {
        right[c] = on[static_cast<std::size_t>(j) * C + c];
        left[c] = counts[c] - right[c];
      }
      const double gain =
          parent - n_left * Gini(left, n_left) - n_right * Gini(right, n_right);
      if (gain > best_gain || (gain == best_gain && best >= 0 && j < best)) {
        best_gain = gain;
        best = j;
      }
    }
    if (best >= 0) importance_[best] += best_gain / sample_total_;
    return best;
  }

  const TrainingView& data_;
  const RandomForestParams& params_;
  int candidates_;
  double sample_total_;
  Rng rng_;
  Tree tree_;
  std::vector<double> importance_;
  std::vector<int> column_order_;
};

class BoostedTreeBuilder {
 public:
  BoostedTreeBuilder(const TrainingView& data, const GradientBoostingParams& params,
                     int target_class, const std::vector<double>& grad,
                     const std::vector<double>& hess)
      : data_(data),
        params_(params),
        target_class_(target_class),
        grad_(grad),
        hess_(hess),
        importance_(static_cast<std::size_t>(data.width), 0.0) {}

  Tree Build() {
    std::vector<int> all(data_.rows());
    std::iota(all.begin(), all.end(), 0);
    Grow(all, 0);
    return std::move(tree_);
  }

  const std::vector<double>& importance() const { return importance_; }

 private:
  double Score(double g, double h) const { return g * g / (h + params_.l2); }

  int Grow(const std::vector<int>& samples, int depth) {
    const int node = static_cast<int>(tree_.size());
    tree_.emplace_back();
    double g = 0.0, h = 0.0;
    for (int s : samples) {
      g += grad_[s];
      h += hess_[s];
    }
    const double n = static_cast<double>(samples.size());
    int best = -1;
    double best_gain = kMinGain;
    if (depth < params_.max_depth && n >= 2.0 * params_.min_leaf) {
      std::vector<double> col_g(static_cast<std::size_t>(data_.width), 0.0);
      std::vector<double> col_h(static_cast<std::size_t>(data_.width), 0.0);
      std::vector<double> col_n(static_cast<std::size_t>(data_.width), 0.0);
      for (int s : samples) {
        for (int j : data_.active[s]) {
          col_g[j] += grad_[s];
          col_h[j] += hess_[s];
          col_n[j] += 1.0;
        }
      }
      const double parent = Score(g, h);
      for (Index j = 0; j < data_.width; ++j) {
        const double n_right = col_n[j];
        const double n_left = n - n_right;
        if (n_right < params_.min_leaf || n_left < params_.min_leaf) continue;
        const double gain = 0.5 * (Score(g - col_g[j], h - col_h[j]) +
                                   Score(col_g[j], col_h[j]) - parent);
        if (gain > best_gain) {
          best_gain = gain;
          best = static_cast<int>(j);
        }
      }
    }
    if (best < 0) {
      tree_[node].scores.assign(data_.classes, 0.0);
      tree_[node].scores[target_class_] = -params_.learning_rate * g / (h + params_.l2);
      return node;
    }
    importance_[best] += best_gain;
    std::vector<int> left, right;
    for (int s : samples) (data_.Has(s, best) ? right : left).push_back(s);
    const int l = Grow(left, depth + 1);
    const int r = Grow(right, depth + 1);
    tree_[node].column = best;
    tree_[node].left = l;
    tree_[node].right = r;
    return node;
  }

  const TrainingView& data_;
  const GradientBoostingParams& params_;
  int target_class_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  Tree tree_;
  std::vector<double> importance_;
};

Eigen::VectorXd Softmax(const Eigen::VectorXd& raw) {
  const double top = raw.maxCoeff();
  Eigen::VectorXd p = (raw.array() - top).exp();
  return p / p.sum();
}

Eigen::VectorXd ClassPriors(const TrainingView& data) {
  Eigen::VectorXd priors = Eigen::VectorXd::Zero(data.classes);
  for (int label : data.y) priors[label] += 1.0;
  return priors / static_cast<double>(data.rows());
}

double Median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace

TreeEnsemble TrainRandomForest(const IndicatorMatrix& x, std::span<const int> y,
                               std::span<const std::string> class_names,
                               const RandomForestParams& params) {
  CheckInputs(x, y);
  if (params.n_trees < 1 || params.max_depth < 0 || params.min_leaf < 1) {
    throw ConfigError("invalid random forest parameters");
  }
  const ClassMap classes = MapClasses(y, class_names);
  TreeEnsemble model = MakeShell(x, classes, EnsembleKind::kRandomForest);
  const TrainingView data = Canonicalize(x.z, y, classes);
  const int width = static_cast<int>(x.cols());
  int candidates = params.feature_subsample > 0
                       ? params.feature_subsample
                       : static_cast<int>(std::lround(std::sqrt(static_cast<double>(width))));
  candidates = std::clamp(candidates, 1, std::max(width, 1));
  model.hyperparams = {{"n_trees", params.n_trees},
                       {"max_depth", params.max_depth},
                       {"min_leaf", params.min_leaf},
                       {"feature_subsample", candidates},
                       {"seed", params.seed}};

  if (classes.names.size() < 2) {
    model.degenerate = true;
    model.base_score = ClassPriors(data);
    model.tree_weight = 1.0;
    return model;
  }
  model.base_score = Eigen::VectorXd::Zero(data.classes);
  model.tree_weight = 1.0 / params.n_trees;

  const int n = data.rows();
  std::vector<Tree> trees(params.n_trees);
  std::vector<std::vector<double>> importance(params.n_trees);
  ParallelFor(static_cast<std::size_t>(params.n_trees), params.threads, [&](std::size_t t) {
    Rng rng = MakeRng(params.seed, "rf-tree", t);
    std::vector<int> samples(n);
    for (auto& s : samples) s = static_cast<int>(UniformIndex(rng, n));
    std::sort(samples.begin(), samples.end());
    ForestTreeBuilder builder(data, params, candidates, static_cast<double>(n),
                              std::move(rng));
    trees[t] = builder.Build(std::move(samples));
    importance[t] = builder.importance();
  });
  std::vector<double> by_column(width, 0.0);
  for (const auto& imp : importance) {
    for (int j = 0; j < width; ++j) by_column[j] += imp[j];
  }
  model.trees = std::move(trees);
  AggregateImportances(x, by_column, model);
  return model;
}

TreeEnsemble TrainGradientBoosting(const IndicatorMatrix& x, std::span<const int> y,
                                   std::span<const std::string> class_names,
                                   const GradientBoostingParams& params) {
  CheckInputs(x, y);
  if (params.n_rounds < 0 || params.max_depth < 0 || params.min_leaf < 1 ||
      params.learning_rate < 0.0 || params.l2 < 0.0) {
    throw ConfigError("invalid gradient boosting parameters");
  }
  const ClassMap classes = MapClasses(y, class_names);
  TreeEnsemble model = MakeShell(x, classes, EnsembleKind::kGradientBoosting);
  const TrainingView data = Canonicalize(x.z, y, classes);
  model.hyperparams = {{"n_rounds", params.n_rounds},
                       {"max_depth", params.max_depth},
                       {"learning_rate", params.learning_rate},
                       {"min_leaf", params.min_leaf},
                       {"l2", params.l2},
                       {"seed", params.seed}};
  const int C = data.classes;
  const int n = data.rows();
  const Eigen::VectorXd priors = ClassPriors(data);
  model.base_score = priors.array().log();
  model.tree_weight = 1.0;
  if (C < 2) {
    model.degenerate = true;
    model.base_score = priors;
    model.kind = EnsembleKind::kRandomForest;  // constant probability model
    return model;
  }

  Eigen::MatrixXd raw(n, C);
  for (int i = 0; i < n; ++i) raw.row(i) = model.base_score.transpose();
  auto log_loss = [&] {
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd p = Softmax(raw.row(i).transpose());
      loss -= std::log(std::max(p[data.y[i]], 1e-300));
    }
    return loss / n;
  };
  model.training_loss.push_back(log_loss());

  std::vector<double> by_column(static_cast<std::size_t>(x.cols()), 0.0);
  std::vector<std::vector<double>> grad(C, std::vector<double>(n));
  std::vector<std::vector<double>> hess(C, std::vector<double>(n));
  for (int round = 0; round < params.n_rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd p = Softmax(raw.row(i).transpose());
      for (int c = 0; c < C; ++c) {
        grad[c][i] = p[c] - (data.y[i] == c ? 1.0 : 0.0);
        hess[c][i] = std::max(p[c] * (1.0 - p[c]), 1e-16);
      }
    }
    std::vector<Tree> round_trees(C);
    std::vector<std::vector<double>> round_importance(C);
    ParallelFor(static_cast<std::size_t>(C), params.threads, [&](std::size_t c) {
      BoostedTreeBuilder builder(data, params, static_cast<int>(c), grad[c], hess[c]);
      round_trees[c] = builder.Build();
      round_importance[c] = builder.importance();
    });
    for (int c = 0; c < C; ++c) {
      for (Index j = 0; j < x.cols(); ++j) by_column[j] += round_importance[c][j];
      model.trees.push_back(std::move(round_trees[c]));
    }
    // Update raw scores from this round's trees on the canonical rows.
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < C; ++c) {
        const Tree& tree = model.trees[model.trees.size() - C + c];
        int node = 0;
        while (!tree[node].is_leaf()) {
          node = data.Has(i, tree[node].column) ? tree[node].right : tree[node].left;
        }
        raw(i, c) += tree[node].scores[c];
      }
    }
    model.training_loss.push_back(log_loss());
  }
  AggregateImportances(x, by_column, model);
  return model;
}

const TreeNode& Descend(const Tree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  int node = 0;
  while (!tree[node].is_leaf()) {
    node = x(tree[node].column) != 0.0 ? tree[node].right : tree[node].left;
  }
  return tree[node];
}

Eigen::VectorXd RawOutput(const TreeEnsemble& model,
                          const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (x.size() != model.width()) {
    throw ConfigError("input width " + std::to_string(x.size()) +
                      " does not match model width " + std::to_string(model.width()));
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.class_count());
  for (const auto& tree : model.trees) {
    const auto& leaf = Descend(tree, x);
    for (Index c = 0; c < sum.size(); ++c) sum[c] += leaf.scores[c];
  }
  return model.base_score + model.tree_weight * sum;
}

Eigen::VectorXd PredictProba(const TreeEnsemble& model,
                             const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  Eigen::VectorXd raw = RawOutput(model, x);
  if (model.kind == EnsembleKind::kGradientBoosting) return Softmax(raw);
  return raw / raw.sum();
}

int PredictClass(const TreeEnsemble& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const Eigen::VectorXd p = PredictProba(model, x);
  Index best = 0;
  p.maxCoeff(&best);
  return static_cast<int>(best);
}

double LogLoss(const TreeEnsemble& model, const Eigen::MatrixXd& x,
               std::span<const int> y_model_classes) {
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd p = PredictProba(model, x.row(i));
    loss -= std::log(std::max(p[y_model_classes[i]], 1e-300));
  }
  return loss / static_cast<double>(x.rows());
}

nlohmann::json EnsembleToJson(const TreeEnsemble& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json column = nlohmann::json::array(), left = nlohmann::json::array(),
                   right = nlohmann::json::array(), scores = nlohmann::json::array();
    for (const auto& node : tree) {
      column.push_back(node.column);
      left.push_back(node.left);
      right.push_back(node.right);
      scores.push_back(node.is_leaf() ? nlohmann::json(node.scores) : nlohmann::json());
    }
    trees.push_back(
        {{"column", column}, {"left", left}, {"right", right}, {"scores", scores}});
  }
  return {{"kind", model.kind == EnsembleKind::kRandomForest ? "random-forest"
                                                             : "gradient-boosting"},
          {"classes", model.classes},
          {"variables", model.variables},
          {"variable_sizes", model.variable_sizes},
          {"importances", model.importances},
          {"columns", model.columns},
          {"base_score", std::vector<double>(model.base_score.data(),
                                             model.base_score.data() + model.base_score.size())},
          {"tree_weight", model.tree_weight},
          {"degenerate", model.degenerate},
          {"training_loss", model.training_loss},
          {"hyperparams", model.hyperparams},
          {"trees", trees}};
}

TreeEnsemble EnsembleFromJson(const nlohmann::json& json) {
  TreeEnsemble model;
  try {
    const auto kind = json.at("kind").get<std::string>();
    if (kind == "random-forest") {
      model.kind = EnsembleKind::kRandomForest;
    } else if (kind == "gradient-boosting") {
      model.kind = EnsembleKind::kGradientBoosting;
    } else {
      throw ConfigError("unknown ensemble kind '" + kind + "'");
    }
    model.classes = json.at("classes").get<std::vector<std::string>>();
    model.variables = json.at("variables").get<std::vector<std::string>>();
    model.variable_sizes = json.at("variable_sizes").get<std::vector<int>>();
    model.importances = json.at("importances").get<std::vector<double>>();
    model.columns = json.at("columns").get<std::vector<std::string>>();
    const auto base = json.at("base_score").get<std::vector<double>>();
    model.base_score = Eigen::Map<const Eigen::VectorXd>(base.data(),
                                                          static_cast<Index>(base.size()));
    model.tree_weight = json.at("tree_weight").get<double>();
    model.degenerate = json.at("degenerate").get<bool>();
    model.training_loss = json.at("training_loss").get<std::vector<double>>();
    model.hyperparams = json.at("hyperparams");
    for (const auto& t : json.at("trees")) {
      const auto column = t.at("column").get<std::vector<int>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto& scores = t.at("scores");
      Tree tree(column.size());
      for (std::size_t i = 0; i < column.size(); ++i) {
        tree[i].column = column[i];
        tree[i].left = left[i];
        tree[i].right = right[i];
        if (column[i] < 0) {
          tree[i].scores = scores.at(i).get<std::vector<double>>();
          if (tree[i].scores.size() != model.classes.size()) {
            throw ConfigError("leaf score count does not match class count");
          }
        } else if (column[i] >= static_cast<int>(model.columns.size()) ||
                   left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                   left[i] >= static_cast<int>(column.size()) ||
                   right[i] >= static_cast<int>(column.size())) {
          throw ConfigError("malformed tree node");
        }
      }
      model.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model: ") + e.what());
  }
  return model;
}

std::vector<std::string> ScreeningReport::Selected() const {
  std::vector<std::string> out;
  for (const auto& v : variables) {
    if (v.selected) out.push_back(v.name);
  }
  return out;
}

nlohmann::json ScreeningReportToJson(const ScreeningReport& report) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : report.variables) {
    vars.push_back({{"name", v.name},
                    {"rf_score_mean", v.rf_score_mean},
                    {"gb_score_mean", v.gb_score_mean},
                    {"rf_fold_scores", v.rf_fold_scores},
                    {"gb_fold_scores", v.gb_fold_scores},
                    {"selected", v.selected}});
  }
  return {{"fold_count", report.fold_count},
          {"seed", report.seed},
          {"rule", report.rule == ConsensusRule::kAveraged ? "averaged" : "per-fold-majority"},
          {"rf_median", report.rf_median},
          {"gb_median", report.gb_median},
          {"degenerate", report.degenerate},
          {"variables", vars}};
}

std::vector<int> StratifiedFolds(std::span<const int> y, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("fold count must be at least 2");
  const int classes = y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
  std::vector<int> fold_of(y.size(), 0);
  Rng rng = MakeRng(seed, "folds");
  int dealt = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<int> members;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) members.push_back(static_cast<int>(i));
    }
    Shuffle(members.begin(), members.end(), rng);
    for (int i : members) fold_of[i] = dealt++ % folds;
  }
  return fold_of;
}

ScreeningReport ConsensusSelect(const CategoricalDataset& ds, const std::string& target,
                                const ScreeningParams& params) {
  if (params.folds < 2) throw ConfigError("fold count must be at least 2");
  const std::size_t target_index = ds.schema.RequireVariable(target);
  const auto& class_names = ds.schema.variables[target_index].categories;
  Labels y(ds.rows());
  for (Index i = 0; i < ds.rows(); ++i) y[i] = ds.codes(i, static_cast<Index>(target_index));

  std::vector<std::string> candidates;
  for (const auto& v : ds.schema.variables) {
    if (v.name != target) candidates.push_back(v.name);
  }
  if (candidates.empty()) throw DataError("no candidate variables to screen");

  ScreeningReport report;
  report.fold_count = params.folds;
  report.seed = params.seed;
  report.rule = params.rule;
  for (const auto& name : candidates) {
    VariableScreening entry;
    entry.name = name;
    report.variables.push_back(std::move(entry));
  }

  std::vector<int> class_count(class_names.size(), 0);
  for (int label : y) ++class_count[label];
  const auto present =
      std::count_if(class_count.begin(), class_count.end(), [](int c) { return c > 0; });
  if (present < 2) {
    report.degenerate = true;
    return report;
  }
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (class_count[c] > 0 && class_count[c] < params.folds) {
      throw DataError("class '" + class_names[c] + "' has only " +
                      std::to_string(class_count[c]) +
                      " rows, so some fold would miss it; use fewer folds");
    }
  }

  const IndicatorMatrix full = Indicator(ds, candidates);
  const std::vector<int> fold_of = StratifiedFolds(y, params.folds, params.seed);
  const std::size_t m = candidates.size();
  std::vector<std::vector<double>> rf_scores(params.folds), gb_scores(params.folds);
  for (int f = 0; f < params.folds; ++f) {
    std::vector<Index> rows;
    Labels y_train;
    for (Index i = 0; i < ds.rows(); ++i) {
      if (fold_of[i] != f) {
        rows.push_back(i);
        y_train.push_back(y[i]);
      }
    }
    IndicatorMatrix train;
    train.blocks = full.blocks;
    train.z.resize(static_cast<Index>(rows.size()), full.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) train.z.row(r) = full.z.row(rows[r]);

    RandomForestParams rf = params.rf;
    rf.seed = DeriveSeed(params.seed, "screen-rf", f);
    rf.threads = params.threads;
    GradientBoostingParams gb = params.gb;
    gb.seed = DeriveSeed(params.seed, "screen-gb", f);
    gb.threads = params.threads;
    rf_scores[f] = TrainRandomForest(train, y_train, class_names, rf).importances;
    gb_scores[f] = TrainGradientBoosting(train, y_train, class_names, gb).importances;
  }

  std::vector<double> rf_mean(m, 0.0), gb_mean(m, 0.0);
  for (std::size_t v = 0; v < m; ++v) {
    auto& entry = report.variables[v];
    for (int f = 0; f < params.folds; ++f) {
      entry.rf_fold_scores.push_back(rf_scores[f][v]);
      entry.gb_fold_scores.push_back(gb_scores[f][v]);
      rf_mean[v] += rf_scores[f][v];
      gb_mean[v] += gb_scores[f][v];
    }
    rf_mean[v] /= params.folds;
    gb_mean[v] /= params.folds;
    entry.rf_score_mean = rf_mean[v];
    entry.gb_score_mean = gb_mean[v];
  }
  report.rf_median = Median(rf_mean);
  report.gb_median = Median(gb_mean);

  if (params.rule == ConsensusRule::kAveraged) {
    for (std::size_t v = 0; v < m; ++v) {
      report.variables[v].selected =
          rf_mean[v] > report.rf_median && gb_mean[v] > report.gb_median;
    }
  } else {
    const int needed = (params.folds + 1) / 2;
    std::vector<int> rf_votes(m, 0), gb_votes(m, 0);
    for (int f = 0; f < params.folds; ++f) {
      const double rf_med = Median(rf_scores[f]);
      const double gb_med = Median(gb_scores[f]);
      for (std::size_t v = 0; v < m; ++v) {
        rf_votes[v] += rf_scores[f][v] > rf_med;
        gb_votes[v] += gb_scores[f][v] > gb_med;
      }
    }
    for (std::size_t v = 0; v < m; ++v) {
      report.variables[v].selected = rf_votes[v] >= needed && gb_votes[v] >= needed;
    }
  }
  return report;
}

}  // namespace ccashap
