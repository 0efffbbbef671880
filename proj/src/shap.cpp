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

#include "ccashap/shap.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <map>
#include <numeric>

#include "ccashap/csv.hpp"
#include "ccashap/errors.hpp"
#include "ccashap/parallel.hpp"
#include "ccashap/random.hpp"

namespace ccashap {
namespace {

// Distinct background rows with multiplicities, in first-occurrence order.
struct WeightedBackground {
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> weights;  // multiplicity / total
};

WeightedBackground Collapse(const Eigen::MatrixXd& rows) {
  WeightedBackground out;
  std::map<std::vector<double>, std::size_t> seen;
  std::vector<double> counts;
  for (Index i = 0; i < rows.rows(); ++i) {
    std::vector<double> key(static_cast<std::size_t>(rows.cols()));
    for (Index j = 0; j < rows.cols(); ++j) key[j] = rows(i, j);
    auto [it, inserted] = seen.emplace(std::move(key), out.rows.size());
    if (inserted) {
      out.rows.push_back(rows.row(i));
      counts.push_back(1.0);
    } else {
      counts[it->second] += 1.0;
    }
  }
  for (double c : counts) out.weights.push_back(c / static_cast<double>(rows.rows()));
  return out;
}

// share[a][b]: Shapley value, for a player that must be present, of the
// indicator game "all of A present and none of B present" with |A| = a and
// |B| = b, i.e. (a-1)! b! / (a+b)!. A player that must be absent receives
// -a! (b-1)! / (a+b)! = -share[b][a].
class ShareTable {
 public:
  explicit ShareTable(int m) : m_(m), table_((m + 1) * (m + 1), 0.0) {
    for (int a = 1; a <= m; ++a) {
      for (int b = 0; a + b <= m; ++b) {
        // (a-1)! b! / (a+b)! = 1 / ((a+b) * C(a+b-1, b))
        double binom = 1.0;
        for (int t = 1; t <= b; ++t) binom = binom * (a - 1 + t) / t;
        table_[a * (m + 1) + b] = 1.0 / ((a + b) * binom);
      }
    }
  }
  double operator()(int a, int b) const { return table_[a * (m_ + 1) + b]; }

 private:
  int m_;
  std::vector<double> table_;
};

class PathExplainer {
 public:
  PathExplainer(const TreeEnsemble& model, std::span<const FeatureGroup> groups)
      : model_(model),
        m_(static_cast<int>(groups.size())),
        shares_(static_cast<int>(groups.size())),
        group_of_(static_cast<std::size_t>(model.width()), -1),
        x_ok_(groups.size(), 1),
        b_ok_(groups.size(), 1) {
    for (int g = 0; g < m_; ++g) {
      for (Index j = 0; j < groups[g].size; ++j) group_of_[groups[g].offset + j] = g;
    }
  }

  // Adds weight * (Shapley values of the single-reference game) to phi.
  void Accumulate(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& b, double weight,
                  Eigen::MatrixXd& phi) {
    x_ = &x;
    b_ = &b;
    phi_ = &phi;
    for (const auto& tree : model_.trees) {
      tree_ = &tree;
      scale_ = weight * model_.tree_weight;
      Walk(0);
    }
  }

 private:
  void Walk(int node_index) {
    const TreeNode& node = (*tree_)[node_index];
    if (node.is_leaf()) {
      Leaf(node);
      return;
    }
    const int g = group_of_[node.column];
    const bool x_right = (*x_)(node.column) != 0.0;
    const bool b_right = (*b_)(node.column) != 0.0;
    const std::uint8_t x_was = x_ok_[g];
    const std::uint8_t b_was = b_ok_[g];
    for (int side = 0; side < 2; ++side) {
      const bool right = side == 1;
      const std::uint8_t x_now = x_was && (x_right == right);
      const std::uint8_t b_now = b_was && (b_right == right);
      if (!x_now && !b_now) continue;
      x_ok_[g] = x_now;
      b_ok_[g] = b_now;
      Walk(right ? node.right : node.left);
    }
    x_ok_[g] = x_was;
    b_ok_[g] = b_was;
  }

  void Leaf(const TreeNode& leaf) {
    int a = 0, b = 0;
    for (int g = 0; g < m_; ++g) {
      if (x_ok_[g] && !b_ok_[g]) ++a;
      if (b_ok_[g] && !x_ok_[g]) ++b;
    }
    if (a + b == 0) return;
    const double gain = a > 0 ? shares_(a, b) : 0.0;
    const double loss = b > 0 ? shares_(b, a) : 0.0;
    for (int g = 0; g < m_; ++g) {
      double share;
      if (x_ok_[g] && !b_ok_[g]) {
        share = gain;
      } else if (b_ok_[g] && !x_ok_[g]) {
        share = -loss;
      } else {
        continue;
      }
      for (std::size_t c = 0; c < leaf.scores.size(); ++c) {
        (*phi_)(g, static_cast<Index>(c)) += scale_ * share * leaf.scores[c];
      }
    }
  }

  const TreeEnsemble& model_;
  int m_;
  ShareTable shares_;
  std::vector<int> group_of_;
  std::vector<std::uint8_t> x_ok_;
  std::vector<std::uint8_t> b_ok_;
  const Eigen::RowVectorXd* x_ = nullptr;
  const Eigen::RowVectorXd* b_ = nullptr;
  const Tree* tree_ = nullptr;
  Eigen::MatrixXd* phi_ = nullptr;
  double scale_ = 0.0;
};

void CheckGroups(const TreeEnsemble& model, std::span<const FeatureGroup> groups) {
  if (static_cast<int>(groups.size()) > kMaxShapPlayers) {
    throw ConfigError(std::to_string(groups.size()) + " variables exceed the exact " +
                      "enumeration budget of " + std::to_string(kMaxShapPlayers) +
                      "; sampling approximations are not supported");
  }
  std::vector<int> cover(static_cast<std::size_t>(model.width()), 0);
  for (const auto& g : groups) {
    if (g.offset < 0 || g.size < 1 || g.offset + g.size > model.width()) {
      throw ConfigError("feature group '" + g.name + "' is outside the model input");
    }
    for (Index j = 0; j < g.size; ++j) ++cover[g.offset + j];
  }
  for (int c : cover) {
    if (c != 1) throw ConfigError("feature groups must partition the model input");
  }
}

ShapValues CoalitionShap(const TreeEnsemble& model, const Eigen::RowVectorXd& x,
                         std::span<const FeatureGroup> groups, const WeightedBackground& bg) {
  const int m = static_cast<int>(groups.size());
  const Index classes = model.class_count();
  const std::size_t subsets = std::size_t{1} << m;
  std::vector<Eigen::VectorXd> value(subsets, Eigen::VectorXd::Zero(classes));
  Eigen::RowVectorXd z(x.size());
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t r = 0; r < bg.rows.size(); ++r) {
      z = bg.rows[r];
      for (int g = 0; g < m; ++g) {
        if (mask & (std::size_t{1} << g)) {
          z.segment(groups[g].offset, groups[g].size) =
              x.segment(groups[g].offset, groups[g].size);
        }
      }
      value[mask] += bg.weights[r] * RawOutput(model, z);
    }
  }
  // weight[s] = s! (m - s - 1)! / m!
  std::vector<double> weight(static_cast<std::size_t>(std::max(m, 1)), 0.0);
  for (int s = 0; s < m; ++s) {
    double w = 1.0 / m;
    for (int t = 1; t <= s; ++t) w = w * t / (m - t);
    weight[s] = w;
  }
  ShapValues out;
  out.phi = Eigen::MatrixXd::Zero(m, classes);
  for (int i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      const int size = std::popcount(mask);
      out.phi.row(i) += weight[size] * (value[mask | bit] - value[mask]).transpose();
    }
  }
  out.base = value[0];
  out.output = value[subsets - 1];
  return out;
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<FeatureGroup> GroupsOf(const TreeEnsemble& model) {
  std::vector<FeatureGroup> groups;
  Index offset = 0;
  for (std::size_t v = 0; v < model.variables.size(); ++v) {
    const Index size = v < model.variable_sizes.size() ? model.variable_sizes[v] : 0;
    groups.push_back({model.variables[v], offset, size});
    offset += size;
  }
  return groups;
}

std::vector<FeatureGroup> GroupsOf(const IndicatorMatrix& x) {
  std::vector<FeatureGroup> groups;
  for (const auto& b : x.blocks) groups.push_back({b.name, b.offset, b.size});
  return groups;
}

BackgroundSet SampleBackground(const Eigen::MatrixXd& rows, Index size, std::uint64_t seed) {
  if (rows.rows() < 1) throw ConfigError("background source is empty");
  if (size < 1) throw ConfigError("background size must be positive");
  BackgroundSet bg;
  bg.seed = seed;
  std::vector<Index> order(rows.rows());
  std::iota(order.begin(), order.end(), 0);
  if (size < rows.rows()) {
    Rng rng = MakeRng(seed, "shap-background");
    Shuffle(order.begin(), order.end(), rng);
    order.resize(size);
    std::sort(order.begin(), order.end());
  }
  bg.source_rows = order;
  bg.rows.resize(static_cast<Index>(order.size()), rows.cols());
  for (std::size_t r = 0; r < order.size(); ++r) bg.rows.row(r) = rows.row(order[r]);
  return bg;
}

ShapValues ExactShap(const TreeEnsemble& model, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                     std::span<const FeatureGroup> groups, const BackgroundSet& bg,
                     ShapAlgorithm algorithm) {
  if (x.size() != model.width()) {
    throw ConfigError("input width " + std::to_string(x.size()) +
                      " does not match model width " + std::to_string(model.width()));
  }
  if (bg.rows.rows() < 1) throw ConfigError("background set is empty");
  if (bg.rows.cols() != model.width()) {
    throw ConfigError("background width does not match model width");
  }
  CheckGroups(model, groups);
  const WeightedBackground weighted = Collapse(bg.rows);
  const Eigen::RowVectorXd xr = x;
  if (algorithm == ShapAlgorithm::kCoalitions) {
    return CoalitionShap(model, xr, groups, weighted);
  }
  ShapValues out;
  out.phi = Eigen::MatrixXd::Zero(static_cast<Index>(groups.size()), model.class_count());
  out.base = Eigen::VectorXd::Zero(model.class_count());
  PathExplainer explainer(model, groups);
  for (std::size_t r = 0; r < weighted.rows.size(); ++r) {
    explainer.Accumulate(xr, weighted.rows[r], weighted.weights[r], out.phi);
    out.base += weighted.weights[r] * RawOutput(model, weighted.rows[r]);
  }
  out.output = RawOutput(model, xr);
  return out;
}

ShapExplanation ShapSummary(const TreeEnsemble& model, const Eigen::MatrixXd& rows,
                            std::span<const Index> row_ids, const BackgroundSet& bg,
                            ClassMode class_mode, int threads, ShapAlgorithm algorithm) {
  if (rows.rows() < 1) throw ConfigError("no rows to explain");
  if (static_cast<Index>(row_ids.size()) != rows.rows()) {
    throw ConfigError("row id count does not match row count");
  }
  const auto groups = GroupsOf(model);
  ShapExplanation out;
  out.classes = model.classes;
  for (const auto& g : groups) out.feature_names.push_back(g.name);
  out.row_ids.assign(row_ids.begin(), row_ids.end());
  out.class_mode = class_mode;
  out.output_scale =
      model.kind == EnsembleKind::kGradientBoosting ? "log-odds" : "probability";
  out.background_size = bg.rows.rows();
  out.background_seed = bg.seed;
  out.phi.resize(static_cast<std::size_t>(rows.rows()));
  out.predicted_class.resize(static_cast<std::size_t>(rows.rows()));
  std::vector<Eigen::VectorXd> bases(static_cast<std::size_t>(rows.rows()));
  ParallelFor(static_cast<std::size_t>(rows.rows()), threads, [&](std::size_t i) {
    auto values = ExactShap(model, rows.row(static_cast<Index>(i)), groups, bg, algorithm);
    out.phi[i] = std::move(values.phi);
    bases[i] = std::move(values.base);
    out.predicted_class[i] = PredictClass(model, rows.row(static_cast<Index>(i)));
  });
  out.base_values = bases.front();

  const Index m = static_cast<Index>(groups.size());
  out.mean_abs.assign(static_cast<std::size_t>(m), 0.0);
  for (std::size_t i = 0; i < out.phi.size(); ++i) {
    for (Index g = 0; g < m; ++g) {
      if (class_mode == ClassMode::kPredictedClass) {
        out.mean_abs[g] += std::abs(out.phi[i](g, out.predicted_class[i]));
      } else {
        out.mean_abs[g] += out.phi[i].row(g).cwiseAbs().sum() /
                           static_cast<double>(out.classes.size());
      }
    }
  }
  for (auto& v : out.mean_abs) v /= static_cast<double>(out.phi.size());
  out.feature_order.resize(static_cast<std::size_t>(m));
  std::iota(out.feature_order.begin(), out.feature_order.end(), 0);
  std::stable_sort(out.feature_order.begin(), out.feature_order.end(),
                   [&](Index a, Index b) { return out.mean_abs[a] > out.mean_abs[b]; });
  return out;
}

std::string FormatShapCsv(const ShapExplanation& explanation) {
  csv::Record header = {"row_id", "predicted_class"};
  for (const auto& f : explanation.feature_names) {
    for (const auto& c : explanation.classes) header.push_back(f + ":" + c);
  }
  std::string out = csv::FormatRecord(header);
  for (std::size_t i = 0; i < explanation.phi.size(); ++i) {
    csv::Record rec = {std::to_string(explanation.row_ids[i]),
                       explanation.classes[explanation.predicted_class[i]]};
    const auto& phi = explanation.phi[i];
    for (Index g = 0; g < phi.rows(); ++g) {
      for (Index c = 0; c < phi.cols(); ++c) rec.push_back(FormatDouble(phi(g, c)));
    }
    out += csv::FormatRecord(rec);
  }
  return out;
}

nlohmann::json ShapSidecar(const ShapExplanation& explanation) {
  std::vector<std::string> order;
  for (Index g : explanation.feature_order) order.push_back(explanation.feature_names[g]);
  return {
      {"classes", explanation.classes},
      {"base_values", std::vector<double>(explanation.base_values.data(),
                                          explanation.base_values.data() +
                                              explanation.base_values.size())},
      {"feature_names", explanation.feature_names},
      {"feature_order", order},
      {"mean_abs_phi", explanation.mean_abs},
      {"class_mode",
       explanation.class_mode == ClassMode::kPredictedClass ? "predicted-class" : "per-class"},
      {"output_scale", explanation.output_scale},
      {"marginalization", "interventional"},
      {"background", {{"size", explanation.background_size}, {"seed", explanation.background_seed}}},
      {"rows", explanation.phi.size()}};
}

}  // namespace ccashap
