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

#include <random>

#include <gtest/gtest.h>

#include "ccashap/csv.hpp"
#include "ccashap/errors.hpp"

namespace ccashap {
namespace {

const std::vector<std::string> kSeverity = {"KA", "BC", "O"};

// Independent oracle: builds every hybrid row explicitly and applies the
// Shapley weights |S|!(M-|S|-1)!/M! to v(S u {i}) - v(S).
Eigen::MatrixXd OracleShap(const TreeEnsemble& model, const Eigen::RowVectorXd& x,
                           const std::vector<FeatureGroup>& groups, const Eigen::MatrixXd& bg,
                           Eigen::VectorXd* base) {
  const int m = static_cast<int>(groups.size());
  const int c = static_cast<int>(model.class_count());
  std::vector<Eigen::VectorXd> v(std::size_t{1} << m, Eigen::VectorXd::Zero(c));
  for (std::size_t s = 0; s < v.size(); ++s) {
    for (Index b = 0; b < bg.rows(); ++b) {
      Eigen::RowVectorXd hybrid = bg.row(b);
      for (int g = 0; g < m; ++g) {
        if (s >> g & 1) {
          hybrid.segment(groups[g].offset, groups[g].size) =
              x.segment(groups[g].offset, groups[g].size);
        }
      }
      v[s] += RawOutput(model, hybrid);
    }
    v[s] /= static_cast<double>(bg.rows());
  }
  std::vector<double> fact(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) fact[i] = fact[i - 1] * i;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(m, c);
  for (int i = 0; i < m; ++i) {
    for (std::size_t s = 0; s < v.size(); ++s) {
      if (s >> i & 1) continue;
      const int size = __builtin_popcountll(s);
      const double w = fact[size] * fact[m - size - 1] / fact[m];
      phi.row(i) += w * (v[s | (std::size_t{1} << i)] - v[s]).transpose();
    }
  }
  *base = v[0];
  return phi;
}

CategoricalDataset Random(int n, int q, unsigned seed, double noise) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cat(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CategoricalDataset ds;
  for (int v = 0; v < q; ++v) ds.schema.variables.push_back({"V" + std::to_string(v), {"x", "y", "z"}});
  ds.schema.variables.push_back({"Severity", kSeverity});
  ds.schema.target = "Severity";
  ds.codes.resize(n, q + 1);
  for (int i = 0; i < n; ++i) {
    for (int v = 0; v < q; ++v) ds.codes(i, v) = cat(rng);
    int label = (ds.codes(i, 0) + (q > 1 ? ds.codes(i, 1) : 0)) % 3;
    if (unit(rng) < noise) label = cat(rng);
    ds.codes(i, q) = label;
  }
  return ds;
}

struct Fixture {
  IndicatorMatrix x;
  Labels y;
};

Fixture Make(int n, int q, unsigned seed, double noise = 0.2) {
  const auto ds = Random(n, q, seed, noise);
  std::vector<std::string> names;
  for (int v = 0; v < q; ++v) names.push_back("V" + std::to_string(v));
  Fixture f{Indicator(ds, names), ds.TargetCodes()};
  return f;
}

TreeEnsemble Forest(const Fixture& f, std::uint64_t seed, int trees = 25) {
  RandomForestParams p;
  p.n_trees = trees;
  p.max_depth = 5;
  p.min_leaf = 2;
  p.seed = seed;
  return TrainRandomForest(f.x, f.y, kSeverity, p);
}

TreeEnsemble Boosted(const Fixture& f, std::uint64_t seed, int rounds = 10) {
  GradientBoostingParams p;
  p.n_rounds = rounds;
  p.max_depth = 3;
  p.min_leaf = 2;
  p.seed = seed;
  return TrainGradientBoosting(f.x, f.y, kSeverity, p);
}

BackgroundSet Background(const Fixture& f, Index size, std::uint64_t seed) {
  return SampleBackground(f.x.z, size, seed);
}

// Three variables P, Q, R (two columns each); depth-2 tree on P then Q or R.
TreeEnsemble ThreeVariableTree() {
  TreeEnsemble model;
  model.kind = EnsembleKind::kRandomForest;
  model.classes = {"KA", "O"};
  model.columns = {"P:a", "P:b", "Q:a", "Q:b", "R:a", "R:b"};
  model.variables = {"P", "Q", "R"};
  model.variable_sizes = {2, 2, 2};
  model.importances = {0.5, 0.3, 0.2};
  model.base_score = Eigen::VectorXd::Zero(2);
  model.tree_weight = 1.0;
  Tree tree(7);
  tree[0] = {1, 1, 2, {}};
  tree[1] = {3, 3, 4, {}};
  tree[2] = {5, 5, 6, {}};
  tree[3] = {-1, -1, -1, {0.9, 0.1}};
  tree[4] = {-1, -1, -1, {0.6, 0.4}};
  tree[5] = {-1, -1, -1, {0.3, 0.7}};
  tree[6] = {-1, -1, -1, {0.05, 0.95}};
  model.trees = {tree};
  return model;
}

Eigen::RowVectorXd OneHot(std::initializer_list<int> codes) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * static_cast<Index>(codes.size()));
  Index v = 0;
  for (int c : codes) row(2 * v++ + c) = 1.0;
  return row;
}

TEST(ExactShapTest, ThreeVariableTreeMatchesBruteForceOracle) {
  const auto model = ThreeVariableTree();
  const auto groups = GroupsOf(model);
  ASSERT_EQ(groups.size(), 3u);
  BackgroundSet bg;
  bg.rows.resize(4, 6);
  bg.rows << OneHot({0, 0, 0}), OneHot({1, 0, 1}), OneHot({0, 1, 1}), OneHot({1, 1, 0});
  for (const auto& x : {OneHot({1, 1, 1}), OneHot({0, 1, 0}), OneHot({1, 0, 0})}) {
    Eigen::VectorXd base;
    const auto oracle = OracleShap(model, x, groups, bg.rows, &base);
    for (auto algo : {ShapAlgorithm::kTreePaths, ShapAlgorithm::kCoalitions}) {
      const auto got = ExactShap(model, x, groups, bg, algo);
      EXPECT_LE((got.phi - oracle).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((got.base - base).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ExactShapTest, ConstantModelGivesZeroAttribution) {
  auto model = ThreeVariableTree();
  model.trees.clear();
  model.base_score = Eigen::Vector2d(0.25, 0.75);
  BackgroundSet bg;
  bg.rows = OneHot({0, 1, 0});
  const auto got = ExactShap(model, OneHot({1, 0, 1}), GroupsOf(model), bg);
  EXPECT_EQ(got.phi, Eigen::MatrixXd::Zero(3, 2));
  EXPECT_EQ(got.base, model.base_score);
}

TEST(ExactShapTest, IndicatorModelCreditsOnlyItsVariable) {
  auto model = ThreeVariableTree();
  Tree stump(3);
  stump[0] = {1, 1, 2, {}};
  stump[1] = {-1, -1, -1, {0.0, 1.0}};
  stump[2] = {-1, -1, -1, {1.0, 0.0}};
  model.trees = {stump};
  BackgroundSet bg;
  bg.rows.resize(3, 6);
  bg.rows << OneHot({0, 0, 0}), OneHot({0, 1, 1}), OneHot({0, 0, 1});
  const auto x = OneHot({1, 1, 0});
  const auto got = ExactShap(model, x, GroupsOf(model), bg);
  const Eigen::VectorXd fx = RawOutput(model, x);
  EXPECT_EQ(got.phi.row(0).transpose(), fx - got.base);
  EXPECT_EQ(got.phi.row(1), Eigen::RowVectorXd::Zero(2));
  EXPECT_EQ(got.phi.row(2), Eigen::RowVectorXd::Zero(2));
}

TEST(ExactShapTest, TrainedModelsMatchOracleAndAreEfficient) {
  const auto f = Make(200, 5, 21);
  const auto bg = Background(f, 12, 21);
  for (const auto& model : {Forest(f, 21), Boosted(f, 21)}) {
    const auto groups = GroupsOf(model);
    for (Index i = 0; i < 6; ++i) {
      const Eigen::RowVectorXd x = f.x.z.row(i * 17);
      Eigen::VectorXd base;
      const auto oracle = OracleShap(model, x, groups, bg.rows, &base);
      const auto fast = ExactShap(model, x, groups, bg);
      const auto brute = ExactShap(model, x, groups, bg, ShapAlgorithm::kCoalitions);
      EXPECT_LE((fast.phi - oracle).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LE((brute.phi - oracle).cwiseAbs().maxCoeff(), 1e-9);
      const Eigen::VectorXd recon = fast.phi.colwise().sum().transpose() + fast.base;
      EXPECT_LE((recon - RawOutput(model, x)).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LE((fast.output - RawOutput(model, x)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ExactShapTest, UnusedVariableGetsExactlyZero) {
  auto f = Make(150, 4, 22);
  // V3 is made constant so no split can use it.
  for (Index i = 0; i < f.x.rows(); ++i) {
    f.x.z.block(i, 9, 1, 3) << 1, 0, 0;
  }
  const auto bg = Background(f, 10, 22);
  for (const auto& model : {Forest(f, 22), Boosted(f, 22)}) {
    for (Index i = 0; i < 5; ++i) {
      Eigen::RowVectorXd x = f.x.z.row(i);
      x.segment(9, 3) << 0, 0, 1;  // unseen value, still never split on
      const auto got = ExactShap(model, x, GroupsOf(model), bg);
      for (Index c = 0; c < got.phi.cols(); ++c) EXPECT_EQ(got.phi(3, c), 0.0);
    }
  }
}

// Appends a copy of every tree with the column blocks of variables a and b
// swapped, so the two variables play identical roles.
TreeEnsemble Symmetrized(TreeEnsemble model, int a, int b) {
  const auto groups = GroupsOf(model);
  auto swap_column = [&](int column) {
    for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
      const auto& g = groups[from];
      if (column >= g.offset && column < g.offset + g.size) {
        return static_cast<int>(groups[to].offset + (column - g.offset));
      }
    }
    return column;
  };
  const auto original = model.trees;
  for (auto tree : original) {
    for (auto& node : tree) {
      if (!node.is_leaf()) node.column = swap_column(node.column);
    }
    model.trees.push_back(std::move(tree));
  }
  model.tree_weight /= 2.0;
  return model;
}

TEST(ExactShapTest, DuplicatedVariablesReceiveEqualValues) {
  auto f = Make(200, 4, 23);
  // V1 duplicates V0 in every row.
  for (Index i = 0; i < f.x.rows(); ++i) f.x.z.block(i, 3, 1, 3) = f.x.z.block(i, 0, 1, 3);
  const auto model = Symmetrized(Forest(f, 23), 0, 1);
  const auto bg = Background(f, 15, 23);
  std::vector<Index> ids(f.x.rows());
  for (Index i = 0; i < f.x.rows(); ++i) ids[i] = i;
  const auto summary = ShapSummary(model, f.x.z.topRows(40), std::span(ids).first(40), bg,
                                   ClassMode::kPerClass);
  EXPECT_NEAR(summary.mean_abs[0], summary.mean_abs[1], 1e-9);
  for (const auto& phi : summary.phi) {
    EXPECT_LE((phi.row(0) - phi.row(1)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ExactShapTest, EnsembleValuesAreSumsOfTreeValues) {
  const auto f = Make(150, 4, 24);
  const auto bg = Background(f, 10, 24);
  for (const auto& model : {Forest(f, 24, 6), Boosted(f, 24, 3)}) {
    const Eigen::RowVectorXd x = f.x.z.row(7);
    const auto whole = ExactShap(model, x, GroupsOf(model), bg);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(whole.phi.rows(), whole.phi.cols());
    Eigen::VectorXd base = model.base_score;
    for (const auto& tree : model.trees) {
      TreeEnsemble single = model;
      single.trees = {tree};
      single.base_score.setZero();
      const auto part = ExactShap(single, x, GroupsOf(single), bg);
      sum += part.phi;
      base += part.base;
    }
    EXPECT_LE((whole.phi - sum).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((whole.base - base).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ExactShapTest, ContractViolations) {
  const auto model = ThreeVariableTree();
  BackgroundSet bg;
  bg.rows = OneHot({0, 0, 0});
  const auto groups = GroupsOf(model);
  EXPECT_THROW(ExactShap(model, Eigen::RowVectorXd::Zero(5), groups, bg), ConfigError);
  std::vector<FeatureGroup> partial(groups.begin(), groups.begin() + 2);
  EXPECT_THROW(ExactShap(model, OneHot({0, 0, 0}), partial, bg), ConfigError);

  TreeEnsemble wide;
  wide.kind = EnsembleKind::kRandomForest;
  wide.classes = {"KA", "O"};
  wide.base_score = Eigen::VectorXd::Zero(2);
  std::vector<FeatureGroup> many;
  for (int v = 0; v < kMaxShapPlayers + 1; ++v) {
    wide.variables.push_back("W" + std::to_string(v));
    wide.variable_sizes.push_back(2);
    wide.columns.push_back("W" + std::to_string(v) + ":a");
    wide.columns.push_back("W" + std::to_string(v) + ":b");
    many.push_back({wide.variables.back(), 2 * v, 2});
  }
  BackgroundSet wide_bg;
  wide_bg.rows = Eigen::MatrixXd::Zero(1, wide.width());
  EXPECT_THROW(ExactShap(wide, Eigen::RowVectorXd::Zero(wide.width()), many, wide_bg),
               ConfigError);
}

TEST(ShapSummaryTest, SingleRowReproducesExactShapAndOrderIsDescending) {
  const auto f = Make(200, 6, 25);
  const auto model = Boosted(f, 25);
  const auto bg = Background(f, 20, 25);
  const std::vector<Index> one = {42};
  const auto single = ShapSummary(model, f.x.z.row(42), one, bg);
  const auto direct = ExactShap(model, f.x.z.row(42), GroupsOf(model), bg);
  EXPECT_EQ(single.phi[0], direct.phi);
  EXPECT_EQ(single.base_values, direct.base);
  EXPECT_EQ(single.output_scale, "log-odds");

  std::vector<Index> ids(60);
  for (Index i = 0; i < 60; ++i) ids[i] = 100 + i;
  const auto summary = ShapSummary(model, f.x.z.topRows(60), ids, bg);
  ASSERT_EQ(summary.feature_order.size(), 6u);
  for (std::size_t k = 1; k < summary.feature_order.size(); ++k) {
    EXPECT_GE(summary.mean_abs[summary.feature_order[k - 1]],
              summary.mean_abs[summary.feature_order[k]]);
  }
  // Predicted-class mode averages |phi| of each row's predicted class.
  double expected = 0.0;
  for (std::size_t i = 0; i < summary.phi.size(); ++i) {
    expected += std::abs(summary.phi[i](0, summary.predicted_class[i]));
  }
  EXPECT_NEAR(summary.mean_abs[0], expected / 60.0, 1e-15);

  const auto threaded = ShapSummary(model, f.x.z.topRows(60), ids, bg,
                                    ClassMode::kPredictedClass, 4);
  EXPECT_EQ(FormatShapCsv(threaded), FormatShapCsv(summary));
  EXPECT_EQ(ShapSidecar(threaded), ShapSidecar(summary));
  EXPECT_THROW(ShapSummary(model, Eigen::MatrixXd(0, f.x.cols()), {}, bg), ConfigError);
}

TEST(ShapSummaryTest, CsvLayoutAndSidecar) {
  const auto f = Make(80, 3, 26);
  const auto model = Forest(f, 26);
  const auto bg = Background(f, 200, 26);
  EXPECT_EQ(bg.rows.rows(), 80);
  std::vector<Index> ids = {5, 9};
  const auto summary = ShapSummary(model, f.x.z.topRows(2), ids, bg);
  const auto table = csv::Parse(FormatShapCsv(summary));
  ASSERT_EQ(table.size(), 3u);
  const csv::Record header = {"row_id", "predicted_class", "V0:KA", "V0:BC", "V0:O",
                              "V1:KA", "V1:BC", "V1:O",    "V2:KA", "V2:BC", "V2:O"};
  EXPECT_EQ(table[0], header);
  EXPECT_EQ(table[1][0], "5");
  EXPECT_EQ(table[2][0], "9");
  EXPECT_EQ(table[1][1], summary.classes[summary.predicted_class[0]]);
  EXPECT_EQ(std::stod(table[1][2]), summary.phi[0](0, 0));
  const auto side = ShapSidecar(summary);
  EXPECT_EQ(side["marginalization"], "interventional");
  EXPECT_EQ(side["background"]["size"], 80);
  EXPECT_EQ(side["background"]["seed"], 26);
  EXPECT_EQ(side["output_scale"], "probability");
  EXPECT_EQ(side["feature_names"].size(), 3u);
}

TEST(BackgroundTest, SamplingIsSeededWithoutReplacementInSourceOrder) {
  const Eigen::MatrixXd rows = Eigen::MatrixXd::Random(50, 4);
  const auto a = SampleBackground(rows, 10, 3);
  const auto b = SampleBackground(rows, 10, 3);
  EXPECT_EQ(a.source_rows, b.source_rows);
  ASSERT_EQ(a.source_rows.size(), 10u);
  for (std::size_t i = 1; i < a.source_rows.size(); ++i) {
    EXPECT_LT(a.source_rows[i - 1], a.source_rows[i]);
  }
  for (Index i = 0; i < 10; ++i) EXPECT_EQ(a.rows.row(i), rows.row(a.source_rows[i]));
  EXPECT_NE(SampleBackground(rows, 10, 4).source_rows, a.source_rows);
  EXPECT_THROW(SampleBackground(rows, 0, 3), ConfigError);
}

}  // namespace
}  // namespace ccashap
