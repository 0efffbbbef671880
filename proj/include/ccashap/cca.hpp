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

#ifndef CCASHAP_CCA_HPP_
#define CCASHAP_CCA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ccashap/dataset.hpp"
#include "ccashap/errors.hpp"
#include "ccashap/random.hpp"

namespace ccashap {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Correspondence analysis of a cluster-by-category table.
template <typename Scalar = double>
struct CaResult {
  MatrixX<Scalar> b;              // J x d standard column coordinates
  MatrixX<Scalar> row_coords;     // K x d standard row coordinates
  VectorX<Scalar> singular_values;
  VectorX<Scalar> row_masses;
  VectorX<Scalar> col_masses;
  std::vector<std::string> diagnostics;

  Index dims() const { return b.cols(); }
};

namespace internal {

// Completes the columns of `v` whose singular value is numerically zero to an
// orthonormal basis that is also orthogonal to `trivial`, so zero-inertia
// dimensions never reproduce the constant solution.
template <typename Scalar>
void CompleteNullColumns(MatrixX<Scalar>& v, const VectorX<Scalar>& sigma,
                         const VectorX<Scalar>& trivial, Scalar zero_tol) {
  const Index j = v.rows();
  Index next_basis = 0;
  for (Index col = 0; col < v.cols(); ++col) {
    if (sigma[col] > zero_tol) continue;
    VectorX<Scalar> candidate = v.col(col);
    for (int attempt = 0; attempt <= j; ++attempt) {
      candidate -= trivial * trivial.dot(candidate);
      for (Index prev = 0; prev < col; ++prev) {
        candidate -= v.col(prev) * v.col(prev).dot(candidate);
      }
      const Scalar norm = candidate.norm();
      if (norm > Scalar(1e-6)) {
        v.col(col) = candidate / norm;
        break;
      }
      candidate = VectorX<Scalar>::Unit(j, next_basis % j);
      ++next_basis;
    }
  }
}

}  // namespace internal

// P = F / N, masses r and c, S = D_r^-1/2 (P - r c^T) D_c^-1/2 = U Sigma V^T,
// B = D_c^-1/2 V on the d leading non-trivial dimensions. Each dimension is
// signed so that its largest-magnitude V entry is positive. Categories with
// zero mass get zero rows in B. `d` is truncated to min(K, J') when larger,
// J' being the count of categories with positive mass.
template <typename Scalar = double>
CaResult<Scalar> CorrespondenceAnalysis(const ContingencyMatrix& f, Index d) {
  const Index k = f.counts.rows();
  const Index j = f.counts.cols();
  if (d < 1) throw ConfigError("correspondence analysis needs d >= 1");
  if (f.grand_total <= 0) throw NumericalError("contingency table is empty");

  CaResult<Scalar> out;
  const MatrixX<Scalar> p = f.counts.template cast<Scalar>() / Scalar(f.grand_total);
  out.row_masses = p.rowwise().sum();
  out.col_masses = p.colwise().sum().transpose();
  for (Index r = 0; r < k; ++r) {
    if (out.row_masses[r] <= Scalar(0)) {
      throw NumericalError("cluster " + std::to_string(r + 1) + " is empty");
    }
  }
  std::vector<Index> live;
  for (Index c = 0; c < j; ++c) {
    if (out.col_masses[c] > Scalar(0)) {
      live.push_back(c);
    } else {
      out.diagnostics.push_back("category column " + std::to_string(c + 1) +
                                " is absent from the data");
    }
  }
  const Index jl = static_cast<Index>(live.size());
  const Index available = std::min(k, jl);
  if (d > available) {
    out.diagnostics.push_back("requested " + std::to_string(d) + " dimensions, " +
                              std::to_string(available) + " available");
    d = available;
  }

  const VectorX<Scalar> r_isqrt = out.row_masses.array().rsqrt();
  VectorX<Scalar> c_sqrt(jl), c_isqrt(jl);
  MatrixX<Scalar> s(k, jl);
  for (Index c = 0; c < jl; ++c) {
    const Scalar mass = out.col_masses[live[c]];
    c_sqrt[c] = std::sqrt(mass);
    c_isqrt[c] = Scalar(1) / c_sqrt[c];
    for (Index r = 0; r < k; ++r) {
      s(r, c) = r_isqrt[r] * (p(r, live[c]) - out.row_masses[r] * mass) * c_isqrt[c];
    }
  }

  Eigen::JacobiSVD<MatrixX<Scalar>> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  MatrixX<Scalar> u = svd.matrixU().leftCols(d);
  MatrixX<Scalar> v = svd.matrixV().leftCols(d);
  out.singular_values = svd.singularValues().head(d);
  const Scalar zero_tol =
      Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
      std::max(Scalar(1), svd.singularValues().size() > 0 ? svd.singularValues()[0] : Scalar(0));
  for (Index col = 0; col < d; ++col) {
    if (out.singular_values[col] <= zero_tol) out.singular_values[col] = Scalar(0);
  }
  internal::CompleteNullColumns<Scalar>(v, out.singular_values, c_sqrt, zero_tol);
  // U columns for zero dimensions carry no information; keep them orthogonal
  // to the trivial row direction as well.
  const VectorX<Scalar> r_sqrt = out.row_masses.array().sqrt();
  internal::CompleteNullColumns<Scalar>(u, out.singular_values, r_sqrt, zero_tol);

  for (Index col = 0; col < d; ++col) {
    Index arg = 0;
    v.col(col).cwiseAbs().maxCoeff(&arg);
    if (v(arg, col) < Scalar(0)) {
      v.col(col) = -v.col(col);
      u.col(col) = -u.col(col);
    }
  }

  out.b = MatrixX<Scalar>::Zero(j, d);
  for (Index c = 0; c < jl; ++c) out.b.row(live[c]) = v.row(c) * c_isqrt[c];
  out.row_coords = r_isqrt.asDiagonal() * u;
  return out;
}

// Y = (1/q) (I - 11^T/n) Z B, computed by centering the columns of ZB.
template <typename DerivedZ, typename DerivedB>
MatrixX<typename DerivedB::Scalar> ObjectCoordinates(const Eigen::MatrixBase<DerivedZ>& z,
                                                     const Eigen::MatrixBase<DerivedB>& b,
                                                     Index q) {
  using Scalar = typename DerivedB::Scalar;
  if (z.cols() != b.rows()) {
    throw ConfigError("indicator width " + std::to_string(z.cols()) +
                      " does not match quantification rows " + std::to_string(b.rows()));
  }
  if (q < 1) throw ConfigError("variable count q must be positive");
  MatrixX<Scalar> y = z.template cast<Scalar>() * b;
  const auto mean = y.colwise().mean().eval();
  y.rowwise() -= mean;
  y /= Scalar(q);
  return y;
}

template <typename Scalar = double>
struct KMeansResult {
  Labels assign;
  MatrixX<Scalar> centroids;  // K x d
  Scalar wcss = 0;
  std::vector<Scalar> wcss_trace;  // after every centroid update
  int iterations = 0;
};

namespace internal {

template <typename Scalar>
MatrixX<Scalar> Centroids(const MatrixX<Scalar>& y, const Labels& assign, int k,
                          std::vector<Index>& sizes) {
  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(k, y.cols());
  sizes.assign(k, 0);
  for (Index i = 0; i < y.rows(); ++i) {
    g.row(assign[i]) += y.row(i);
    ++sizes[assign[i]];
  }
  for (int c = 0; c < k; ++c) {
    if (sizes[c] > 0) g.row(c) /= Scalar(sizes[c]);
  }
  return g;
}

// Fills every empty cluster with the point farthest from its own centroid,
// taken from a cluster that keeps at least one member.
template <typename Scalar>
MatrixX<Scalar> RepairEmpty(const MatrixX<Scalar>& y, Labels& assign, int k) {
  std::vector<Index> sizes;
  MatrixX<Scalar> g = Centroids(y, assign, k, sizes);
  for (int c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    Index far = -1;
    Scalar far_dist = Scalar(-1);
    for (Index i = 0; i < y.rows(); ++i) {
      if (sizes[assign[i]] < 2) continue;
      const Scalar dist = (y.row(i) - g.row(assign[i])).squaredNorm();
      if (dist > far_dist) {
        far_dist = dist;
        far = i;
      }
    }
    if (far < 0) throw NumericalError("cannot repair empty cluster: too few points");
    assign[far] = c;
    g = Centroids(y, assign, k, sizes);
  }
  return g;
}

template <typename Scalar>
Scalar Wcss(const MatrixX<Scalar>& y, const Labels& assign, const MatrixX<Scalar>& g) {
  Scalar total = 0;
  for (Index i = 0; i < y.rows(); ++i) total += (y.row(i) - g.row(assign[i])).squaredNorm();
  return total;
}

}  // namespace internal

// Lloyd iterations from an initial labelling. Points move to the nearest
// centroid (lowest index on ties); stops when labels are stable or after
// max_iter reassignments.
template <typename Scalar = double>
KMeansResult<Scalar> KMeans(const MatrixX<Scalar>& y, int k, Labels init, int max_iter = 100) {
  if (k < 1 || k > y.rows()) throw ConfigError("k-means needs 1 <= K <= n");
  if (static_cast<Index>(init.size()) != y.rows()) {
    throw ConfigError("initial labelling has wrong length");
  }
  for (int label : init) {
    if (label < 0 || label >= k) throw ConfigError("initial label out of range");
  }
  KMeansResult<Scalar> out;
  out.assign = std::move(init);
  out.centroids = internal::RepairEmpty(y, out.assign, k);
  out.wcss = internal::Wcss(y, out.assign, out.centroids);
  out.wcss_trace.push_back(out.wcss);
  Labels next(out.assign.size());
  for (int it = 0; it < max_iter; ++it) {
    for (Index i = 0; i < y.rows(); ++i) {
      Index best = 0;
      (out.centroids.rowwise() - y.row(i)).rowwise().squaredNorm().minCoeff(&best);
      next[i] = static_cast<int>(best);
    }
    if (next == out.assign) break;
    out.assign = next;
    out.centroids = internal::RepairEmpty(y, out.assign, k);
    out.wcss = internal::Wcss(y, out.assign, out.centroids);
    out.wcss_trace.push_back(out.wcss);
    out.iterations = it + 1;
  }
  return out;
}

// k-means++ seeding followed by Lloyd iterations.
template <typename Scalar = double>
KMeansResult<Scalar> KMeans(const MatrixX<Scalar>& y, int k, std::uint64_t seed,
                            int max_iter = 100) {
  if (k < 1 || k > y.rows()) throw ConfigError("k-means needs 1 <= K <= n");
  Rng rng = MakeRng(seed, "kmeans++");
  const Index n = y.rows();
  MatrixX<Scalar> centers(k, y.cols());
  centers.row(0) = y.row(static_cast<Index>(UniformIndex(rng, n)));
  VectorX<Scalar> dist = (y.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const Scalar total = dist.sum();
    Index pick = static_cast<Index>(UniformIndex(rng, n));
    if (total > Scalar(0)) {
      Scalar target = Scalar(UniformUnit(rng)) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= dist[pick];
        if (target < Scalar(0)) break;
      }
    }
    centers.row(c) = y.row(pick);
    dist = dist.cwiseMin((y.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  Labels init(n);
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    (centers.rowwise() - y.row(i)).rowwise().squaredNorm().minCoeff(&best);
    init[i] = static_cast<int>(best);
  }
  return KMeans<Scalar>(y, k, std::move(init), max_iter);
}

template <typename Scalar = double>
struct Rescaled {
  Scalar gamma = 1;
  MatrixX<Scalar> b_star;
  MatrixX<Scalar> g_star;
};

// gamma = ((K/Q) tr(B^T B) / tr(G^T G))^(1/4); B* = B / gamma, G* = gamma G.
template <typename DerivedB, typename DerivedG>
Rescaled<typename DerivedB::Scalar> Rescale(const Eigen::MatrixBase<DerivedB>& b,
                                            const Eigen::MatrixBase<DerivedG>& g, Index k,
                                            Index q) {
  using Scalar = typename DerivedB::Scalar;
  if (k < 1 || q < 1) throw ConfigError("rescale needs K >= 1 and Q >= 1");
  const Scalar tr_b = b.squaredNorm();
  const Scalar tr_g = g.squaredNorm();
  if (!(tr_g > Scalar(0))) {
    throw NumericalError("all centroids lie at the origin; rescaling is undefined");
  }
  if (!(tr_b > Scalar(0))) {
    throw NumericalError("category quantifications are all zero; rescaling is undefined");
  }
  Rescaled<Scalar> out;
  out.gamma = std::pow(Scalar(k) / Scalar(q) * tr_b / tr_g, Scalar(0.25));
  out.b_star = b / out.gamma;
  out.g_star = g * out.gamma;
  return out;
}

struct CcaOptions {
  int k = 4;
  int restarts = 20;
  double tol = 1e-10;
  int max_iter = 100;
  int dims = 0;  // 0 means max(K - 1, 1)
  std::uint64_t seed = 0;
  int threads = 1;
  // Extra starting labelling tried after the random restarts.
  std::optional<Labels> seeded_start;
  // Called with the object coordinates of every alternation (may run
  // concurrently when threads > 1).
  std::function<void(const Eigen::MatrixXd&)> on_iteration;
};

struct CcaSolution {
  int k = 0;
  std::vector<std::string> variables;  // active variables, schema order
  Labels assign;
  Eigen::MatrixXd y;          // n x d object coordinates
  Eigen::MatrixXd centroids;  // K x d
  CaResult<double> ca;        // CA of the final partition; ca.b is B
  bool rescaled = false;
  double gamma = 1.0;
  Eigen::MatrixXd b_star;
  Eigen::MatrixXd centroids_star;
  double wcss = 0.0;
  double tss = 0.0;
  std::vector<double> cluster_wcss;
  std::vector<Index> sizes;
  int iterations = 0;
  int restarts_used = 0;
  int best_restart = 0;
  std::uint64_t seed = 0;
  std::vector<double> objective_trace;  // wcss/tss after each alternation
  std::vector<std::string> diagnostics;

  const Eigen::MatrixXd& b() const { return ca.b; }
  Index dims() const { return y.cols(); }
  double normalized_wcss() const { return tss > 0.0 ? wcss / tss : 1.0; }
};

// Alternates correspondence analysis of the cluster-by-category table with
// k-means on the object coordinates, from `restarts` random partitions (plus
// options.seeded_start), keeping the lowest final wcss/tss.
CcaSolution ClusterCa(const IndicatorMatrix& z, const CcaOptions& options);

// One alternation run from a given labelling; exposed for tests and the elbow.
CcaSolution ClusterCaFrom(const IndicatorMatrix& z, Labels init, const CcaOptions& options);

struct SupplementaryPoint {
  std::string category;
  Index count = 0;
  Eigen::RowVectorXd coords;  // rescaled like B*
};

struct SupplementaryProjection {
  std::string variable;
  std::vector<SupplementaryPoint> points;
  std::vector<std::string> diagnostics;
};

// Places each category of a passive variable at the mass-weighted average of
// the cluster standard coordinates (its cluster profile), divided by the
// singular value and by gamma, i.e. the supplementary-column transition
// formula of the final CA. A copy of an active variable lands exactly on
// that variable's B* rows.
SupplementaryProjection ProjectSupplementary(const CategoricalDataset& ds,
                                             const std::string& variable,
                                             const CcaSolution& solution);

// Scatter of a K-partition measured in the reference space shared by every K,
// plus the partition's wcss/tss in its own K-specific embedding.
struct ElbowPoint {
  int k = 0;
  double normalized_wcss = 0.0;  // reference wcss / reference tss
  double wcss = 0.0;
  double tss = 0.0;
  double embedding_normalized_wcss = 0.0;
  bool nested_split = false;  // the unrefined split of the previous K was kept
};

struct ElbowCurve {
  std::vector<ElbowPoint> points;
  int knee = 0;
  std::vector<CcaSolution> solutions;  // parallel to points
};

// K whose point lies farthest from the chord through the first and last
// points; the smallest such K on ties.
int KneeByChord(std::span<const ElbowPoint> points);

// Centered indicator columns scaled by 1/sqrt(column mass): the chi-square
// metric on the rows of Z, independent of any clustering.
Eigen::MatrixXd ReferenceCoordinates(const IndicatorMatrix& z);

// Within-cluster sum of squares of `assign` in `reference`.
double PartitionScatter(const Eigen::MatrixXd& reference, const Labels& assign, int k);

// Runs ClusterCa for every K (strictly increasing) and scores each partition
// in ReferenceCoordinates. From the second K on, the previous partition with
// its largest cluster split in two is added as a seeded restart; when the
// refined result scores worse than the previous K, the split itself is kept,
// so the curve never increases.
ElbowCurve Elbow(const IndicatorMatrix& z, std::span<const int> ks, const CcaOptions& base);

// Splits the largest cluster of `assign` with 2-means on `y`; the new cluster
// gets label `new_label`.
Labels SplitLargestCluster(const Eigen::MatrixXd& y, const Labels& assign, int new_label,
                           std::uint64_t seed);

}  // namespace ccashap

#endif  // CCASHAP_CCA_HPP_
