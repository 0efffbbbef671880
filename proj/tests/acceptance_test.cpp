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

// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/SVD>

#include "ccashap/cca.hpp"
#include "ccashap/dataset.hpp"
#include "ccashap/ensembles.hpp"
#include "ccashap/errors.hpp"
#include "ccashap/pipeline.hpp"
#include "ccashap/shap.hpp"
#include "ccashap/synth.hpp"

namespace fs = std::filesystem;

namespace ccashap {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

PlantedDataset PlantedFour(std::uint64_t seed) {
  PlantedSpec spec;
  spec.n = 2000;
  spec.q = 8;
  spec.categories_per_variable = 5;
  spec.k_true = 4;
  spec.separation = 0.6;
  spec.seed = seed;
  return Generate(spec);
}

IndicatorMatrix AllActive(const CategoricalDataset& ds) {
  return Indicator(ds, ds.schema.VariableNames());
}

Outcome PlantedRecovery() {
  std::vector<double> aris;
  double slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto planted = PlantedFour(seed);
    const auto start = std::chrono::steady_clock::now();
    CcaOptions opt;
    opt.k = 4;
    opt.seed = 1000 + seed;
    const auto sol = ClusterCa(AllActive(planted.dataset), opt);
    slowest = std::max(slowest, Seconds(start));
    aris.push_back(AdjustedRandIndex(sol.assign, planted.true_labels));
  }
  std::sort(aris.begin(), aris.end());
  const double median = 0.5 * (aris[4] + aris[5]);
  return {median >= 0.9 && slowest < 60.0,
          "median ARI " + Fmt("%.4f", median) + ", min " + Fmt("%.4f", aris.front()) +
              ", slowest run " + Fmt("%.2f", slowest) + " s"};
}

Outcome ElbowCorrectness() {
  int knees_at_four = 0;
  bool monotone = true;
  std::string knees;
  std::vector<int> ks(10);
  std::iota(ks.begin(), ks.end(), 1);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto planted = PlantedFour(seed);
    CcaOptions opt;
    opt.seed = 2000 + seed;
    const auto curve = Elbow(AllActive(planted.dataset), ks, opt);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      if (curve.points[i].normalized_wcss > curve.points[i - 1].normalized_wcss) monotone = false;
    }
    if (curve.knee == 4) ++knees_at_four;
    knees += (knees.empty() ? "" : ",") + std::to_string(curve.knee);
  }
  return {knees_at_four >= 8 && monotone,
          "knee=4 in " + std::to_string(knees_at_four) + "/10 (knees " + knees + "), " +
              (monotone ? "all curves non-increasing" : "a curve increased")};
}

// Dense oracle: S built entry by entry, then a divide-and-conquer SVD.
Outcome CaOracle() {
  std::mt19937 rng(4242);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index k = 2 + static_cast<Index>(rng() % 5);
    const Index j = 6 + static_cast<Index>(rng() % 15);
    CountMatrix f(k, j);
    for (Index r = 0; r < k; ++r)
      for (Index c = 0; c < j; ++c) f(r, c) = static_cast<std::int64_t>(rng() % 25);
    for (Index c = 0; c < j; ++c)
      if (f.col(c).sum() == 0) f(c % k, c) = 1;
    for (Index r = 0; r < k; ++r)
      if (f.row(r).sum() == 0) f(r, r % j) = 1;
    const Index d = k - 1;
    const auto ca = CorrespondenceAnalysis<double>({f, f.sum()}, d);

    const double n = static_cast<double>(f.sum());
    Eigen::VectorXd row = Eigen::VectorXd::Zero(k), col = Eigen::VectorXd::Zero(j);
    for (Index r = 0; r < k; ++r)
      for (Index c = 0; c < j; ++c) {
        row[r] += f(r, c) / n;
        col[c] += f(r, c) / n;
      }
    Eigen::MatrixXd s(k, j);
    for (Index r = 0; r < k; ++r)
      for (Index c = 0; c < j; ++c)
        s(r, c) = (f(r, c) / n - row[r] * col[c]) / std::sqrt(row[r] * col[c]);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sigma = svd.singularValues().head(d);
    const Eigen::MatrixXd v_oracle = svd.matrixV().leftCols(d);
    // Back to orthonormal singular vectors: V = D_c^{1/2} B.
    const Eigen::MatrixXd v_ca = col.array().sqrt().matrix().asDiagonal() * ca.b;

    if (ca.dims() != d) return {false, "trial " + std::to_string(trial) + ": wrong dimension"};
    worst = std::max(worst, (ca.singular_values - sigma).cwiseAbs().maxCoeff());
    // Compare the projector onto each block of equal singular values, which
    // is free of sign and rotation choices.
    Index start = 0;
    while (start < d) {
      Index end = start + 1;
      while (end < d && std::abs(sigma[end] - sigma[start]) < 1e-10) ++end;
      const Eigen::MatrixXd a = v_ca.middleCols(start, end - start);
      const Eigen::MatrixXd b = v_oracle.middleCols(start, end - start);
      worst = std::max(worst, (a * a.transpose() - b * b.transpose()).cwiseAbs().maxCoeff());
      start = end;
    }
  }
  return {worst <= 1e-8, "100 matrices, max deviation " + Fmt("%.3g", worst)};
}

Outcome CoordinateIdentities() {
  double worst_mean = 0.0, worst_balance = 0.0;
  bool labels_equal = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto planted = PlantedFour(seed);
    const auto z = AllActive(planted.dataset);
    CcaOptions opt;
    opt.k = 4;
    opt.restarts = 5;
    opt.seed = 3000 + seed;
    opt.on_iteration = [&](const Eigen::MatrixXd& y) {
      worst_mean = std::max(worst_mean, y.colwise().mean().cwiseAbs().maxCoeff());
    };
    const auto sol = ClusterCa(z, opt);
    worst_mean = std::max(worst_mean, sol.y.colwise().mean().cwiseAbs().maxCoeff());
    const double lhs = sol.b_star.squaredNorm() / static_cast<double>(z.q());
    const double rhs = sol.centroids_star.squaredNorm() / 4.0;
    worst_balance = std::max(worst_balance, std::abs(lhs - rhs));

    std::mt19937 rng(static_cast<unsigned>(seed));
    Labels init(z.rows());
    for (auto& l : init) l = static_cast<int>(rng() % 4);
    const auto base = KMeans<double>(ObjectCoordinates(z.z, sol.ca.b, z.q()), 4, init);
    for (double alpha : {0.1, 10.0}) {
      const Eigen::MatrixXd scaled = alpha * sol.ca.b;
      const auto km = KMeans<double>(ObjectCoordinates(z.z, scaled, z.q()), 4, init);
      if (km.assign != base.assign) labels_equal = false;
    }
  }
  return {worst_mean <= 1e-12 && worst_balance <= 1e-10 && labels_equal,
          "max |mean Y| " + Fmt("%.3g", worst_mean) + ", trace gap " +
              Fmt("%.3g", worst_balance) + ", k-means labels under B*0.1 and B*10 " +
              (labels_equal ? "identical" : "differ")};
}

// Independent Shapley oracle: explicit hybrid rows and factorial weights.
Eigen::MatrixXd OracleShap(const TreeEnsemble& model, const Eigen::RowVectorXd& x,
                           const std::vector<FeatureGroup>& groups, const Eigen::MatrixXd& bg) {
  const int m = static_cast<int>(groups.size());
  const Index c = model.class_count();
  std::vector<Eigen::VectorXd> v(std::size_t{1} << m, Eigen::VectorXd::Zero(c));
  for (std::size_t s = 0; s < v.size(); ++s) {
    for (Index b = 0; b < bg.rows(); ++b) {
      Eigen::RowVectorXd hybrid = bg.row(b);
      for (int g = 0; g < m; ++g)
        if (s >> g & 1)
          hybrid.segment(groups[g].offset, groups[g].size) =
              x.segment(groups[g].offset, groups[g].size);
      v[s] += RawOutput(model, hybrid);
    }
    v[s] /= static_cast<double>(bg.rows());
  }
  std::vector<double> fact(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) fact[i] = fact[i - 1] * i;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(m, c);
  for (int i = 0; i < m; ++i)
    for (std::size_t s = 0; s < v.size(); ++s) {
      if (s >> i & 1) continue;
      const int size = __builtin_popcountll(s);
      phi.row(i) += fact[size] * fact[m - size - 1] / fact[m] *
                    (v[s | (std::size_t{1} << i)] - v[s]).transpose();
    }
  return phi;
}

// Copies every tree with the blocks of variables a and b swapped.
TreeEnsemble Symmetrized(TreeEnsemble model, int a, int b) {
  const auto groups = GroupsOf(model);
  auto swap_column = [&](int column) {
    for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
      const auto& g = groups[from];
      if (column >= g.offset && column < g.offset + g.size)
        return static_cast<int>(groups[to].offset + (column - g.offset));
    }
    return column;
  };
  const auto original = model.trees;
  for (auto tree : original) {
    for (auto& node : tree)
      if (!node.is_leaf()) node.column = swap_column(node.column);
    model.trees.push_back(std::move(tree));
  }
  model.tree_weight /= 2.0;
  return model;
}

std::vector<bool> UsedVariables(const TreeEnsemble& model) {
  const auto groups = GroupsOf(model);
  std::vector<bool> used(groups.size(), false);
  for (const auto& tree : model.trees)
    for (const auto& node : tree)
      if (!node.is_leaf())
        for (std::size_t g = 0; g < groups.size(); ++g)
          if (node.column >= groups[g].offset && node.column < groups[g].offset + groups[g].size)
            used[g] = true;
  return used;
}

Outcome ShapleyExactness() {
  PlantedSpec spec;
  spec.n = 1200;
  spec.q = 12;
  spec.categories_per_variable = 3;
  spec.k_true = 4;
  spec.separation = 0.6;
  spec.seed = 77;
  Eigen::MatrixXd link(4, 3);
  link << 0.6, 0.2, 0.2,
          0.2, 0.6, 0.2,
          0.2, 0.2, 0.6,
          0.34, 0.33, 0.33;
  spec.severity_link = link;
  auto planted = Generate(spec);
  auto& ds = planted.dataset;
  // A constant passenger variable: 13 explained variables in all.
  const auto names = ds.schema.VariableNames();
  const Index target_col = std::find(names.begin(), names.end(), "Severity") - names.begin();
  ds.schema.variables.push_back({"Dummy", {"only", "never"}});
  ds.codes.conservativeResize(Eigen::NoChange, ds.codes.cols() + 1);
  ds.codes.col(ds.codes.cols() - 1).setZero();
  std::vector<std::string> active;
  for (int v = 1; v <= 12; ++v) active.push_back("V" + std::to_string(v));
  CcaOptions opt;
  opt.k = 4;
  opt.restarts = 5;
  opt.seed = 78;
  const auto sol = ClusterCa(Indicator(ds, active), opt);
  auto features = active;
  features.push_back("Dummy");
  const auto x = Indicator(ds, features);

  double worst_eff = 0.0, worst_sym = 0.0, worst_oracle = 0.0;
  bool dummy_zero = true;
  Index rows_explained = 0;
  for (int k = 0; k < 4; ++k) {
    std::vector<Index> rows;
    for (Index i = 0; i < ds.rows(); ++i)
      if (sol.assign[i] == k) rows.push_back(i);
    Eigen::MatrixXd xk(rows.size(), x.cols());
    Labels yk(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xk.row(r) = x.z.row(rows[r]);
      yk[r] = ds.codes(rows[r], target_col);
    }
    IndicatorMatrix sub = x;
    sub.z = xk;
    RandomForestParams rf;
    rf.n_trees = 60;
    rf.seed = 100 + k;
    GradientBoostingParams gb;
    gb.n_rounds = 40;
    gb.seed = 200 + k;
    const std::vector<std::string> classes = ds.schema.variables[target_col].categories;
    const auto bg = SampleBackground(xk, 100, 300 + k);
    for (const auto& model :
         {TrainRandomForest(sub, yk, classes, rf), TrainGradientBoosting(sub, yk, classes, gb)}) {
      const auto groups = GroupsOf(model);
      const auto used = UsedVariables(model);
      for (Index r = 0; r < xk.rows(); ++r) {
        const auto got = ExactShap(model, xk.row(r), groups, bg);
        const Eigen::VectorXd recon = got.phi.colwise().sum().transpose() + got.base;
        worst_eff = std::max(worst_eff, (recon - RawOutput(model, xk.row(r))).cwiseAbs().maxCoeff());
        for (std::size_t g = 0; g < groups.size(); ++g)
          if (!used[g] && (got.phi.row(g).array() != 0.0).any()) dummy_zero = false;
        ++rows_explained;
      }
      if (used.back()) dummy_zero = false;

      // Duplicated-feature symmetry: V1 copied into V2's block, model symmetrized.
      Eigen::MatrixXd dup = xk;
      dup.middleCols(groups[1].offset, groups[1].size) =
          dup.middleCols(groups[0].offset, groups[0].size);
      const auto sym = Symmetrized(model, 0, 1);
      const auto dup_bg = SampleBackground(dup, 50, 400 + k);
      for (Index r = 0; r < std::min<Index>(dup.rows(), 25); ++r) {
        const auto got = ExactShap(sym, dup.row(r), groups, dup_bg);
        worst_sym = std::max(worst_sym, (got.phi.row(0) - got.phi.row(1)).cwiseAbs().maxCoeff());
      }
    }

    // Three-variable models against the brute-force oracle.
    const std::vector<std::string> three = {"V1", "V2", "V3"};
    IndicatorMatrix x3 = Indicator(ds, three);
    Eigen::MatrixXd x3k(rows.size(), x3.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) x3k.row(r) = x3.z.row(rows[r]);
    x3.z = x3k;
    const auto bg3 = SampleBackground(x3k, 40, 500 + k);
    for (const auto& model : {TrainRandomForest(x3, yk, classes, rf),
                              TrainGradientBoosting(x3, yk, classes, gb)}) {
      const auto groups = GroupsOf(model);
      for (Index r = 0; r < std::min<Index>(x3k.rows(), 20); ++r) {
        const Eigen::MatrixXd oracle = OracleShap(model, x3k.row(r), groups, bg3.rows);
        for (auto algo : {ShapAlgorithm::kTreePaths, ShapAlgorithm::kCoalitions}) {
          const auto got = ExactShap(model, x3k.row(r), groups, bg3, algo);
          worst_oracle = std::max(worst_oracle, (got.phi - oracle).cwiseAbs().maxCoeff());
        }
      }
    }
  }
  return {worst_eff <= 1e-9 && dummy_zero && worst_sym <= 1e-9 && worst_oracle <= 1e-9,
          std::to_string(rows_explained) + " rows on 13 variables, efficiency gap " +
              Fmt("%.3g", worst_eff) + ", dummy " + (dummy_zero ? "exactly 0" : "nonzero") +
              ", symmetry gap " + Fmt("%.3g", worst_sym) + ", oracle gap " +
              Fmt("%.3g", worst_oracle)};
}

// Variables A..F with 3 categories (F constant). Severity is KA when A = x,
// otherwise BC when B = x, otherwise O.
CategoricalDataset ScreeningToy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cat(0, 2);
  CategoricalDataset ds;
  for (const char* name : {"A", "B", "C", "D", "E", "F"})
    ds.schema.variables.push_back({name, {"x", "y", "z"}});
  ds.schema.variables.push_back({"Severity", {"KA", "BC", "O"}});
  ds.schema.target = "Severity";
  const int n = 600;
  ds.codes.resize(n, 7);
  for (int i = 0; i < n; ++i) {
    for (int v = 0; v < 5; ++v) ds.codes(i, v) = cat(rng);
    ds.codes(i, 5) = 0;
    ds.codes(i, 6) = ds.codes(i, 0) == 0 ? 0 : (ds.codes(i, 1) == 0 ? 1 : 2);
  }
  return ds;
}

Outcome ScreeningSanity() {
  int exact = 0;
  bool zero_gain_selected = false;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ScreeningParams params;
    params.seed = seed;
    const auto report = ConsensusSelect(ScreeningToy(seed), "Severity", params);
    const auto selected = report.Selected();
    if (selected == std::vector<std::string>{"A", "B"}) ++exact;
    if (std::find(selected.begin(), selected.end(), "F") != selected.end())
      zero_gain_selected = true;
  }
  return {exact >= 9 && !zero_gain_selected,
          "{A,B} selected in " + std::to_string(exact) + "/10, zero-gain variable " +
              (zero_gain_selected ? "selected" : "never selected")};
}

Outcome SkewBoundary() {
  auto kept = [](int n, int modal) {
    CategoricalDataset ds;
    ds.schema.variables = {{"V", {"a", "b"}}, {"W", {"x", "y"}}};
    ds.codes.resize(n, 2);
    for (int i = 0; i < n; ++i) {
      ds.codes(i, 0) = i < modal ? 0 : 1;
      ds.codes(i, 1) = i % 2;
    }
    return SkewFilter(ds).report.entries[0].kept;
  };
  const bool k86 = kept(100, 86), k85 = kept(100, 85), k84 = kept(100, 84);
  const bool k1720 = kept(20, 17);
  auto word = [](bool k) { return std::string(k ? "kept" : "dropped"); };
  return {!k86 && k85 && k84 && k1720,
          "0.86 " + word(k86) + ", 0.85 " + word(k85) + ", 0.84 " + word(k84) + ", 17/20 " +
              word(k1720)};
}

int Run(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Quote(const fs::path& p) { return "'" + p.string() + "'"; }

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / ("ccashap_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
};

bool Synthesize(const fs::path& dir, int n, std::uint64_t seed) {
  return Run(std::string(CCASHAP_CLI_PATH) + " synth --out " + Quote(dir) + " --n " +
             std::to_string(n) + " --q 8 --categories 5 --k 4 --delta 0.6 --seed " +
             std::to_string(seed) + " --severity") == 0;
}

void WriteConfig(const fs::path& path, const fs::path& data, const std::string& cca_line) {
  std::ofstream out(path);
  out << "input = \"" << data.string() << "\"\n"
      << "target = \"Severity\"\n"
      << "seed = 29\n\n"
      << "[cca]\n" << cca_line << "\n"
      << "restarts = 8\n\n"
      << "[shap]\n"
      << "background_size = 40\n";
}

std::map<std::string, std::string> Artifacts(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (ext == ".csv" || ext == ".json") files[entry.path().filename().string()] = ReadFile(entry.path());
  }
  return files;
}

Outcome Determinism(const fs::path& root) {
  const fs::path data = root / "det_data";
  if (!Synthesize(data, 1200, 5)) return {false, "synth failed"};
  WriteConfig(root / "det.cfg", data / "data.csv", "k_range = [1, 6]");
  const std::string cli = CCASHAP_CLI_PATH;
  const fs::path a = root / "det_a", b = root / "det_b";
  if (Run(cli + " analyze --config " + Quote(root / "det.cfg") + " --out " + Quote(a) +
          " --threads 1 --no-render") != 0 ||
      Run(cli + " analyze --config " + Quote(root / "det.cfg") + " --out " + Quote(b) +
          " --threads 4 --no-render") != 0) {
    return {false, "analyze failed"};
  }
  const auto first = Artifacts(a), second = Artifacts(b);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    if (it == second.end() || it->second != bytes) ++differing;
  }
  const bool same_set = first.size() == second.size();
  return {first.size() >= 8 && same_set && differing == 0,
          std::to_string(first.size()) + " CSV/JSON artifacts compared across --threads 1 and 4, " +
              std::to_string(differing) + " differ"};
}

std::vector<std::string> SplitColumns(const std::string& line) {
  std::vector<std::string> out;
  static const std::regex sep(" {2,}");
  std::string trimmed = line;
  trimmed.erase(0, trimmed.find_first_not_of(' '));
  for (std::sregex_token_iterator it(trimmed.begin(), trimmed.end(), sep, -1), end; it != end;
       ++it) {
    if (!it->str().empty()) out.push_back(*it);
  }
  return out;
}

Outcome ReportShape(const fs::path& root) {
  const fs::path data = root / "shape_data";
  const int n = 1000;
  if (!Synthesize(data, n, 6)) return {false, "synth failed"};
  WriteConfig(root / "shape.cfg", data / "data.csv", "k = 4");
  const fs::path out = root / "shape_out";
  if (Run(std::string(CCASHAP_CLI_PATH) + " analyze --config " + Quote(root / "shape.cfg") +
          " --out " + Quote(out) + " --no-render") != 0) {
    return {false, "analyze failed"};
  }
  std::istringstream text(ReadFile(out / "centroids.txt"));
  std::string line;
  std::getline(text, line);
  const auto header = SplitColumns(line);
  const std::vector<std::string> expected = {"Cluster", "Dim 1", "Dim 2",
                                             "Within Cluster Sum of Squares", "Size"};
  long long total = 0;
  int rows = 0;
  bool well_formed = true;
  while (std::getline(text, line)) {
    if (line.empty()) continue;
    const auto cells = SplitColumns(line);
    if (cells.size() != expected.size() || cells[0] != std::to_string(rows + 1)) {
      well_formed = false;
      break;
    }
    total += std::stoll(cells.back());
    ++rows;
  }
  return {header == expected && well_formed && rows == 4 && total == n,
          "columns [Dim 1, Dim 2, Within Cluster Sum of Squares, Size] " +
              std::string(header == expected ? "present" : "wrong") + ", " +
              std::to_string(rows) + " rows, sizes sum " + std::to_string(total) + " of " +
              std::to_string(n)};
}

}  // namespace
}  // namespace ccashap

int main() {
  using namespace ccashap;
  Workspace work;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"planted recovery", PlantedRecovery},
      {"elbow correctness", ElbowCorrectness},
      {"CA oracle equivalence", CaOracle},
      {"coordinate identities", CoordinateIdentities},
      {"Shapley exactness", ShapleyExactness},
      {"screening sanity", ScreeningSanity},
      {"skew filter boundary", SkewBoundary},
      {"determinism", [&] { return Determinism(work.root); }},
      {"report shape", [&] { return ReportShape(work.root); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failures;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first
              << ": " << outcome.detail << " [" << Fmt("%.1f", Seconds(start)) << " s]"
              << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
