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

#ifndef CCASHAP_SYNTH_HPP_
#define CCASHAP_SYNTH_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccashap/dataset.hpp"
#include "json.hpp"

namespace ccashap {

// Planted-partition generator for categorical data with known clusters.
struct PlantedSpec {
  Index n = 2000;
  int q = 8;
  int categories_per_variable = 5;
  std::vector<int> categories;  // per-variable override; empty means uniform
  int k_true = 4;
  double separation = 0.6;      // delta in [0, 1]
  std::vector<double> cluster_priors;  // empty means equal
  // K_true x C class probabilities; when set a "Severity" target is appended.
  std::optional<Eigen::MatrixXd> severity_link;
  std::vector<std::string> severity_classes = {"KA", "BC", "O"};
  std::uint64_t seed = 0;

  int CategoryCount(int variable) const;
};

struct PlantedDataset {
  CategoricalDataset dataset;
  Labels true_labels;
  PlantedSpec spec;
};

// Cluster k's modal category of variable v: (k + v) mod m_v.
int ModalCategory(const PlantedSpec& spec, int cluster, int variable);

// Rows are independent. The cluster is drawn from the priors, then each
// variable from (1 - delta) * uniform + delta * point mass on the modal
// category. Throws ConfigError when delta = 1 and a variable has fewer than
// K_true categories.
PlantedDataset Generate(const PlantedSpec& spec);

// Chance-corrected pair-counting agreement; 1 iff the partitions coincide up
// to relabelling.
double AdjustedRandIndex(std::span<const int> a, std::span<const int> b);

nlohmann::json PlantedSpecToJson(const PlantedSpec& spec);
PlantedSpec PlantedSpecFromJson(const nlohmann::json& json);

}  // namespace ccashap

#endif  // CCASHAP_SYNTH_HPP_
