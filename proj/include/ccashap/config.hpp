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

#ifndef CCASHAP_CONFIG_HPP_
#define CCASHAP_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "ccashap/dataset.hpp"
#include "ccashap/ensembles.hpp"
#include "ccashap/shap.hpp"
#include "json.hpp"

namespace ccashap {

// Everything `analyze` needs. Paths are kept as written; ResolvePaths makes
// them relative to the config file's directory.
struct PipelineConfig {
  std::string input;
  SchemaMode schema_mode = SchemaMode::kInfer;
  std::string schema;
  std::optional<std::string> target;
  double skew_threshold = 0.85;

  bool screening = true;
  int folds = 5;
  ConsensusRule consensus = ConsensusRule::kAveraged;
  RandomForestParams rf;
  GradientBoostingParams gb;

  std::optional<int> k;
  std::optional<std::pair<int, int>> k_range;
  int restarts = 20;
  double tol = 1e-10;
  int max_iter = 100;
  int dims = 0;
  bool include_severity = false;

  Index background_size = 100;
  ClassMode class_mode = ClassMode::kPredictedClass;
  bool per_cluster = true;
  EnsembleKind model = EnsembleKind::kGradientBoosting;
  ShapAlgorithm algorithm = ShapAlgorithm::kTreePaths;

  std::optional<std::uint64_t> seed;
  std::string output = "ccashap_out";
  int threads = 1;
};

// Parses the flat key = value format:
//
//   # comment
//   input = "crashes.csv"
//   seed = 7
//   [cca]
//   k_range = [1, 10]
//
// Values are quoted strings, integers, floats, true/false or integer arrays.
// A [section] header prefixes the keys below it ("cca.k_range"); dotted keys
// work anywhere. Unknown or repeated keys are ConfigErrors naming the line.
PipelineConfig ParseConfig(std::string_view text);
PipelineConfig LoadConfig(const std::filesystem::path& path);

// Makes relative input/schema/output paths relative to `base`.
void ResolvePaths(PipelineConfig& config, const std::filesystem::path& base);

// Contract checks that need the whole config: a seed, exactly one of k and
// k_range, value ranges. Throws ConfigError.
void ValidateConfig(const PipelineConfig& config);

// Effective settings, defaults included, without output and threads (they
// must not influence results).
nlohmann::json ConfigToJson(const PipelineConfig& config);

}  // namespace ccashap

#endif  // CCASHAP_CONFIG_HPP_
