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

#include "ccashap/cca.hpp"

#include <numeric>
#include <set>

#include "ccashap/parallel.hpp"

namespace ccashap {
namespace {

Index DistinctRows(const IndicatorMatrix& z) {
  std::set<std::vector<Index>> rows;
  for (Index i = 0; i < z.rows(); ++i) {
    std::vector<Index> active;
    for (Index j = 0; j < z.cols(); ++j) {
      if (z.z(i, j) != 0.0) active.push_back(j);
    }
    rows.insert(std::move(active));
  }
  return static_cast<Index>(rows.size());
}

int Dims(const CcaOptions& options) {
  return options.dims > 0 ? options.dims : std::max(options.k - 1, 1);
}

void ValidateOptions(const IndicatorMatrix& z, const CcaOptions& options) {
  if (options.k < 1 || options.k > z.rows()) {
    throw ConfigError("cluster count K must satisfy 1 <= K <= n");
  }
  if (options.restarts < 1) throw ConfigError("restarts must be at least 1");
  if (options.max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (!(options.tol >= 0.0)) throw ConfigError("tol must be non-negative");
  if (z.q() < 1) throw ConfigError("no active variables");
}

Labels RandomPartition(Index n, int k, Rng& rng) {
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  Shuffle(order.begin(), order.end(), rng);
  Labels assign(n);
  for (Index r = 0; r < n; ++r) assign[order[r]] = static_cast<int>(r % k);
  return assign;
}

double TotalScatter(const Eigen::MatrixXd& y) { return y.squaredNorm(); }

// Embedding, centroids and scatter of a fixed partition, so B, Y, G and the
// labels agree.
void FinalizePartition(const IndicatorMatrix& z, Labels assign, const CcaOptions& options,
                       CcaSolution& sol) {
  const int k = options.k;
  const auto f = Contingency(z, assign, k);
  sol.ca = CorrespondenceAnalysis<double>(f, Dims(options));
  sol.diagnostics = sol.ca.diagnostics;
  sol.y = ObjectCoordinates(z.z, sol.ca.b, z.q());
  sol.assign = std::move(assign);
  sol.centroids = internal::Centroids<double>(sol.y, sol.assign, k, sol.sizes);
  sol.cluster_wcss.assign(k, 0.0);
  for (Index i = 0; i < sol.y.rows(); ++i) {
    sol.cluster_wcss[sol.assign[i]] +=
        (sol.y.row(i) - sol.centroids.row(sol.assign[i])).squaredNorm();
  }
  sol.wcss = std::accumulate(sol.cluster_wcss.begin(), sol.cluster_wcss.end(), 0.0);
  sol.tss = TotalScatter(sol.y);
}

void ApplyRescale(const IndicatorMatrix& z, CcaSolution& sol) {
  if (sol.k >= 2 && sol.centroids.squaredNorm() > 0.0 && sol.b().squaredNorm() > 0.0) {
    const auto scaled = Rescale(sol.b(), sol.centroids, sol.k, z.q());
    sol.rescaled = true;
    sol.gamma = scaled.gamma;
    sol.b_star = scaled.b_star;
    sol.centroids_star = scaled.g_star;
  } else {
    sol.rescaled = false;
    sol.gamma = 1.0;
    sol.b_star = sol.b();
    sol.centroids_star = sol.centroids;
    sol.diagnostics.push_back("rescaling undefined: all centroids at the origin");
  }
}

}  // namespace

CcaSolution ClusterCaFrom(const IndicatorMatrix& z, Labels init, const CcaOptions& options) {
  ValidateOptions(z, options);
  const int k = options.k;
  const Index d = Dims(options);
  CcaSolution sol;
  sol.k = k;
  sol.seed = options.seed;
  for (const auto& b : z.blocks) sol.variables.push_back(b.name);

  Labels assign = std::move(init);
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iter; ++it) {
    const auto f = Contingency(z, assign, k);
    const auto ca = CorrespondenceAnalysis<double>(f, d);
    const Eigen::MatrixXd y = ObjectCoordinates(z.z, ca.b, z.q());
    if (options.on_iteration) options.on_iteration(y);
    auto km = KMeans<double>(y, k, assign, options.max_iter);
    const double tss = TotalScatter(y);
    const double ratio = tss > 0.0 ? km.wcss / tss : 1.0;
    sol.objective_trace.push_back(ratio);
    sol.iterations = it + 1;
    const bool stable = km.assign == assign;
    assign = std::move(km.assign);
    if (stable || std::abs(previous - ratio) < options.tol) break;
    previous = ratio;
  }

  FinalizePartition(z, std::move(assign), options, sol);
  return sol;
}

CcaSolution ClusterCa(const IndicatorMatrix& z, const CcaOptions& options) {
  ValidateOptions(z, options);
  if (options.k > 1 && DistinctRows(z) < options.k) {
    throw DataError("K = " + std::to_string(options.k) + " exceeds the number of distinct " +
                    "observations; clusters would be empty, choose a smaller K");
  }
  const int total = options.restarts + (options.seeded_start ? 1 : 0);
  std::vector<CcaSolution> runs(total);
  ParallelFor(static_cast<std::size_t>(total), options.threads, [&](std::size_t r) {
    Labels init;
    if (static_cast<int>(r) < options.restarts) {
      Rng rng = MakeRng(options.seed, "cca-restart", r);
      init = RandomPartition(z.rows(), options.k, rng);
    } else {
      init = *options.seeded_start;
    }
    runs[r] = ClusterCaFrom(z, std::move(init), options);
  });
  int best = 0;
  for (int r = 1; r < total; ++r) {
    if (runs[r].normalized_wcss() < runs[best].normalized_wcss()) best = r;
  }
  CcaSolution sol = std::move(runs[best]);
  sol.best_restart = best;
  sol.restarts_used = total;
  sol.seed = options.seed;

  ApplyRescale(z, sol);
  return sol;
}

SupplementaryProjection ProjectSupplementary(const CategoricalDataset& ds,
                                             const std::string& variable,
                                             const CcaSolution& solution) {
  const std::size_t v = ds.schema.RequireVariable(variable);
  if (std::find(solution.variables.begin(), solution.variables.end(), variable) !=
      solution.variables.end()) {
    throw ConfigError("'" + variable + "' is an active clustering variable");
  }
  if (static_cast<Index>(solution.assign.size()) != ds.rows()) {
    throw ConfigError("dataset rows do not match the clustering");
  }
  const auto& cats = ds.schema.variables[v].categories;
  const int k = solution.k;
  CountMatrix counts = CountMatrix::Zero(k, static_cast<Index>(cats.size()));
  for (Index i = 0; i < ds.rows(); ++i) {
    ++counts(solution.assign[i], ds.codes(i, static_cast<Index>(v)));
  }
  const Index d = solution.ca.dims();
  SupplementaryProjection out;
  out.variable = variable;
  for (Index c = 0; c < static_cast<Index>(cats.size()); ++c) {
    const auto total = counts.col(c).sum();
    if (total == 0) {
      out.diagnostics.push_back("category '" + cats[c] + "' of '" + variable +
                                "' never occurs; omitted");
      continue;
    }
    Eigen::RowVectorXd profile_mean = Eigen::RowVectorXd::Zero(d);
    for (int kk = 0; kk < k; ++kk) {
      profile_mean += (static_cast<double>(counts(kk, c)) / static_cast<double>(total)) *
                      solution.ca.row_coords.row(kk);
    }
    for (Index dim = 0; dim < d; ++dim) {
      const double sigma = solution.ca.singular_values[dim];
      profile_mean[dim] = sigma > 0.0 ? profile_mean[dim] / sigma : 0.0;
    }
    out.points.push_back({cats[c], static_cast<Index>(total), profile_mean / solution.gamma});
  }
  return out;
}

int KneeByChord(std::span<const ElbowPoint> points) {
  if (points.empty()) throw ConfigError("empty elbow curve");
  const auto& a = points.front();
  const auto& b = points.back();
  const double dx = b.k - a.k;
  const double dy = b.normalized_wcss - a.normalized_wcss;
  const double norm = std::hypot(dx, dy);
  int knee = a.k;
  double best = -1.0;
  for (const auto& p : points) {
    const double dist =
        norm > 0.0 ? std::abs(dy * (p.k - a.k) - dx * (p.normalized_wcss - a.normalized_wcss)) / norm
                   : 0.0;
    if (dist > best) {
      best = dist;
      knee = p.k;
    }
  }
  return knee;
}

Labels SplitLargestCluster(const Eigen::MatrixXd& y, const Labels& assign, int new_label,
                           std::uint64_t seed) {
  std::vector<Index> sizes(new_label, 0);
  for (int label : assign) ++sizes[label];
  const int largest =
      static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<Index> members;
  for (Index i = 0; i < static_cast<Index>(assign.size()); ++i) {
    if (assign[i] == largest) members.push_back(i);
  }
  Labels out = assign;
  if (members.size() < 2) return out;
  Eigen::MatrixXd sub(static_cast<Index>(members.size()), y.cols());
  for (std::size_t m = 0; m < members.size(); ++m) sub.row(m) = y.row(members[m]);
  const auto halves = KMeans<double>(sub, 2, seed);
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (halves.assign[m] == 1) out[members[m]] = new_label;
  }
  return out;
}

Eigen::MatrixXd ReferenceCoordinates(const IndicatorMatrix& z) {
  Eigen::MatrixXd r = z.z;
  if (r.rows() == 0) return r;
  const Eigen::RowVectorXd mass = r.colwise().sum();
  r.rowwise() -= mass / static_cast<double>(r.rows());
  for (Index j = 0; j < r.cols(); ++j) {
    r.col(j) *= mass[j] > 0.0 ? 1.0 / std::sqrt(mass[j]) : 0.0;
  }
  return r;
}

double PartitionScatter(const Eigen::MatrixXd& reference, const Labels& assign, int k) {
  std::vector<Index> sizes;
  const auto g = internal::Centroids<double>(reference, assign, k, sizes);
  return internal::Wcss<double>(reference, assign, g);
}

ElbowCurve Elbow(const IndicatorMatrix& z, std::span<const int> ks, const CcaOptions& base) {
  if (ks.empty()) throw ConfigError("empty K range");
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (ks[i] <= ks[i - 1]) throw ConfigError("K range must be strictly increasing");
  }
  const Eigen::MatrixXd reference = ReferenceCoordinates(z);
  const double tss = PartitionScatter(reference, Labels(z.rows(), 0), 1);
  const auto point = [&](const CcaSolution& sol) {
    const double wcss = PartitionScatter(reference, sol.assign, sol.k);
    return ElbowPoint{sol.k, tss > 0.0 ? wcss / tss : 1.0, wcss, tss, sol.normalized_wcss(),
                      false};
  };

  ElbowCurve curve;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    CcaOptions options = base;
    options.k = ks[i];
    options.seed = DeriveSeed(base.seed, "elbow", static_cast<std::uint64_t>(ks[i]));
    options.seeded_start.reset();
    Labels split;
    if (i > 0) {
      const auto& prev = curve.solutions.back();
      split = prev.assign;
      for (int label = prev.k; label < ks[i]; ++label) {
        split = SplitLargestCluster(prev.y, split, label,
                                    DeriveSeed(options.seed, "elbow-split", label));
      }
      options.seeded_start = split;
    }
    auto sol = ClusterCa(z, options);
    auto pt = point(sol);
    if (i > 0 && pt.wcss > curve.points.back().wcss) {
      // Refinement moved away from the nested split; splitting a cluster never
      // raises the scatter, so the split itself is kept.
      std::vector<Index> sizes(ks[i], 0);
      for (int label : split) ++sizes[label];
      if (std::find(sizes.begin(), sizes.end(), Index{0}) == sizes.end()) {
        CcaSolution nested;
        nested.k = ks[i];
        nested.seed = options.seed;
        nested.variables = sol.variables;
        nested.restarts_used = sol.restarts_used;
        nested.best_restart = sol.restarts_used - 1;
        FinalizePartition(z, std::move(split), options, nested);
        ApplyRescale(z, nested);
        nested.diagnostics.push_back("elbow kept the unrefined nested split for K = " +
                                     std::to_string(ks[i]));
        sol = std::move(nested);
        pt = point(sol);
        pt.nested_split = true;
      }
    }
    curve.points.push_back(pt);
    curve.solutions.push_back(std::move(sol));
  }
  curve.knee = KneeByChord(curve.points);
  return curve;
}

}  // namespace ccashap
