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

#include "ccashap/synth.hpp"

#include <map>
#include <numeric>

#include "ccashap/errors.hpp"
#include "ccashap/random.hpp"

namespace ccashap {
namespace {

int Draw(Rng& rng, std::span<const double> probabilities) {
  double u = UniformUnit(rng);
  for (std::size_t i = 0; i + 1 < probabilities.size(); ++i) {
    u -= probabilities[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(probabilities.size()) - 1;
}

double Choose2(double v) { return v * (v - 1.0) / 2.0; }

}  // namespace

int PlantedSpec::CategoryCount(int variable) const {
  return categories.empty() ? categories_per_variable : categories.at(variable);
}

int ModalCategory(const PlantedSpec& spec, int cluster, int variable) {
  return (cluster + variable) % spec.CategoryCount(variable);
}

PlantedDataset Generate(const PlantedSpec& spec) {
  if (spec.n < 1 || spec.q < 1 || spec.k_true < 1) {
    throw ConfigError("planted spec needs n, Q, K_true >= 1");
  }
  if (!(spec.separation >= 0.0 && spec.separation <= 1.0)) {
    throw ConfigError("separation must lie in [0, 1]");
  }
  if (!spec.categories.empty() && static_cast<int>(spec.categories.size()) != spec.q) {
    throw ConfigError("per-variable category counts must have Q entries");
  }
  for (int v = 0; v < spec.q; ++v) {
    const int m = spec.CategoryCount(v);
    if (m < 2) throw ConfigError("every variable needs at least 2 categories");
    if (spec.separation == 1.0 && m < spec.k_true) {
      throw ConfigError("separation 1 needs at least K_true categories per variable");
    }
  }
  std::vector<double> priors = spec.cluster_priors;
  if (priors.empty()) priors.assign(spec.k_true, 1.0 / spec.k_true);
  if (static_cast<int>(priors.size()) != spec.k_true) {
    throw ConfigError("cluster priors must have K_true entries");
  }
  const double prior_sum = std::accumulate(priors.begin(), priors.end(), 0.0);
  for (auto& p : priors) p /= prior_sum;
  const bool with_severity = spec.severity_link.has_value();
  if (with_severity) {
    const auto& link = *spec.severity_link;
    if (link.rows() != spec.k_true ||
        link.cols() != static_cast<Index>(spec.severity_classes.size())) {
      throw ConfigError("severity link must be K_true x classes");
    }
  }

  PlantedDataset out;
  out.spec = spec;
  auto& schema = out.dataset.schema;
  for (int v = 0; v < spec.q; ++v) {
    Variable var{"V" + std::to_string(v + 1), {}};
    for (int c = 0; c < spec.CategoryCount(v); ++c) {
      var.categories.push_back("c" + std::to_string(c + 1));
    }
    schema.variables.push_back(std::move(var));
  }
  if (with_severity) {
    schema.variables.push_back({"Severity", spec.severity_classes});
    schema.target = "Severity";
  }
  const Index width = spec.q + (with_severity ? 1 : 0);
  out.dataset.codes.resize(spec.n, width);
  out.true_labels.resize(spec.n);

  Rng rng = MakeRng(spec.seed, "planted");
  for (Index i = 0; i < spec.n; ++i) {
    const int k = Draw(rng, priors);
    out.true_labels[i] = k;
    for (int v = 0; v < spec.q; ++v) {
      const int m = spec.CategoryCount(v);
      const double u = UniformUnit(rng);
      const int uniform = static_cast<int>(UniformIndex(rng, m));
      out.dataset.codes(i, v) = u < spec.separation ? ModalCategory(spec, k, v) : uniform;
    }
    if (with_severity) {
      const Eigen::RowVectorXd row = spec.severity_link->row(k);
      out.dataset.codes(i, spec.q) =
          Draw(rng, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    }
  }
  schema.Validate();
  return out;
}

double AdjustedRandIndex(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ConfigError("label vectors differ in length");
  if (a.empty()) throw ConfigError("empty labelling");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, count] : joint) index += Choose2(count);
  for (const auto& [key, count] : rows) sum_a += Choose2(count);
  for (const auto& [key, count] : cols) sum_b += Choose2(count);
  const double pairs = Choose2(static_cast<double>(a.size()));
  const double expected = pairs > 0.0 ? sum_a * sum_b / pairs : 0.0;
  const double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

nlohmann::json PlantedSpecToJson(const PlantedSpec& spec) {
  nlohmann::json out = {{"n", spec.n},
                        {"q", spec.q},
                        {"categories_per_variable", spec.categories_per_variable},
                        {"categories", spec.categories},
                        {"k_true", spec.k_true},
                        {"separation", spec.separation},
                        {"cluster_priors", spec.cluster_priors},
                        {"severity_classes", spec.severity_classes},
                        {"seed", spec.seed}};
  if (spec.severity_link) {
    nlohmann::json link = nlohmann::json::array();
    for (Index k = 0; k < spec.severity_link->rows(); ++k) {
      std::vector<double> row(spec.severity_link->cols());
      for (Index c = 0; c < spec.severity_link->cols(); ++c) row[c] = (*spec.severity_link)(k, c);
      link.push_back(row);
    }
    out["severity_link"] = link;
  } else {
    out["severity_link"] = nullptr;
  }
  return out;
}

PlantedSpec PlantedSpecFromJson(const nlohmann::json& json) {
  PlantedSpec spec;
  try {
    spec.n = json.value("n", spec.n);
    spec.q = json.value("q", spec.q);
    spec.categories_per_variable =
        json.value("categories_per_variable", spec.categories_per_variable);
    spec.categories = json.value("categories", spec.categories);
    spec.k_true = json.value("k_true", spec.k_true);
    spec.separation = json.value("separation", spec.separation);
    spec.cluster_priors = json.value("cluster_priors", spec.cluster_priors);
    spec.severity_classes = json.value("severity_classes", spec.severity_classes);
    spec.seed = json.value("seed", spec.seed);
    if (json.contains("severity_link") && !json.at("severity_link").is_null()) {
      const auto rows = json.at("severity_link").get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd link(static_cast<Index>(rows.size()),
                           rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (static_cast<Index>(rows[k].size()) != link.cols()) {
          throw ConfigError("ragged severity link");
        }
        for (std::size_t c = 0; c < rows[k].size(); ++c) link(k, c) = rows[k][c];
      }
      spec.severity_link = link;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed planted spec: ") + e.what());
  }
  return spec;
}

}  // namespace ccashap
