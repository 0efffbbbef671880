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

#ifndef CCASHAP_PIPELINE_HPP_
#define CCASHAP_PIPELINE_HPP_

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "ccashap/cca.hpp"
#include "ccashap/config.hpp"
#include "ccashap/dataset.hpp"
#include "json.hpp"

namespace ccashap {

// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string Digest(std::string_view bytes);

// Shortest "%.17g" rendering, stable across runs.
std::string FormatNumber(double value);

// Load and skew filter, shared by analyze and explain.
struct PreparedData {
  CategoricalDataset raw;
  FilterResult filtered;
};
PreparedData PrepareData(const PipelineConfig& config);

// k,normalized_wcss,wcss,tss,embedding_normalized_wcss,nested_split,knee
std::string FormatElbowCsv(std::span<const ElbowPoint> points, int knee);

// row_id,cluster with 0-based row ids (data rows in file order) and 1-based
// clusters.
std::string FormatClustersCsv(const Labels& assign);

// Aligned text layout: Cluster, Dim 1, Dim 2, Within Cluster Sum of Squares, Size.
// Coordinates are the rescaled centroids G*; the WCSS is measured in the same
// scaling (gamma^2 times the object-space value).
std::string FormatCentroidTable(const CcaSolution& solution);
nlohmann::json CentroidsToJson(const CcaSolution& solution);

// label,kind,dim1,dim2 for categories (B*), centroids (G*) and supplementary
// points; dim2 is 0 when the solution has one dimension.
std::string FormatBiplotCsv(const CcaSolution& solution, const IndicatorMatrix& z,
                            const std::optional<SupplementaryProjection>& supplementary);

struct AnalysisResult {
  std::filesystem::path output;
  int k = 0;
  std::vector<std::string> selected;
  nlohmann::json manifest;
};

// Runs load, skew filter, screening, clustering, severity overlay and the
// per-cluster models with their explanations, writing every artifact into
// config.output. Progress goes to `log` when given.
AnalysisResult Analyze(const PipelineConfig& config, std::ostream* log = nullptr);

// Re-explains cluster `cluster` (1-based) from the model saved by Analyze in
// config.output, writing shap_cluster_<cluster>.csv/.json into `out_dir`.
void ExplainSaved(const PipelineConfig& config, int cluster, const std::filesystem::path& out_dir,
                  std::ostream* log = nullptr);

// Reads a whole file; DataError naming it when missing.
std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ccashap

#endif  // CCASHAP_PIPELINE_HPP_
