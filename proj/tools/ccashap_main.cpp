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

// Command-line front end: analyze, synth, render, explain.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ccashap/config.hpp"
#include "ccashap/errors.hpp"
#include "ccashap/pipeline.hpp"
#include "ccashap/render.hpp"
#include "ccashap/synth.hpp"

namespace fs = std::filesystem;
using namespace ccashap;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitOther = 1;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

PipelineConfig Configure(const std::string& path, const Overrides& o) {
  PipelineConfig config = LoadConfig(path);
  if (o.seed) config.seed = *o.seed;
  if (o.threads) config.threads = *o.threads;
  if (!o.out.empty()) config.output = o.out;
  return config;
}

// Default cluster-to-severity link: cluster k leans to class k mod C.
Eigen::MatrixXd DefaultLink(int k, int classes) {
  Eigen::MatrixXd link = Eigen::MatrixXd::Constant(k, classes, 1.0);
  for (int r = 0; r < k; ++r) link(r, r % classes) += 3.0;
  for (int r = 0; r < k; ++r) link.row(r) /= link.row(r).sum();
  return link;
}

void WriteSynth(const PlantedSpec& spec, const fs::path& out) {
  const auto planted = Generate(spec);
  fs::create_directories(out);
  WriteCsv(planted.dataset, out / "data.csv");
  std::string labels = "row_id,cluster\n";
  for (std::size_t i = 0; i < planted.true_labels.size(); ++i) {
    labels += std::to_string(i) + "," + std::to_string(planted.true_labels[i] + 1) + "\n";
  }
  WriteFile(out / "labels.csv", labels);
  WriteFile(out / "spec.json", PlantedSpecToJson(planted.spec).dump(2) + "\n");
  WriteFile(out / "schema.json", SchemaToJson(planted.dataset.schema).dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ccashap: cluster correspondence analysis with exact Shapley explanations"};
  app.set_version_flag("--version", std::string(CCASHAP_VERSION));
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");

  Overrides overrides;
  std::string config_path;
  bool no_render = false;
  auto* analyze = app.add_subcommand("analyze", "Run the full pipeline from a config file");
  analyze->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", overrides.out, "Output directory (overrides config)");
  analyze->add_option("--seed", overrides.seed, "Seed (overrides config)");
  analyze->add_option("--threads", overrides.threads, "Worker threads; never changes results")
      ->check(CLI::PositiveNumber);
  analyze->add_flag("--no-render", no_render, "Skip the SVG plots");
  analyze->add_flag("-v,--verbose", verbose, "Progress messages on stderr");

  PlantedSpec spec;
  std::string spec_path, synth_out;
  bool severity = false;
  int categories = spec.categories_per_variable;
  auto* synth = app.add_subcommand("synth", "Write a planted-cluster dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--spec", spec_path, "Planted spec JSON")->check(CLI::ExistingFile);
  synth->add_option("--n", spec.n, "Observations");
  synth->add_option("--q", spec.q, "Variables");
  synth->add_option("--categories", categories, "Categories per variable");
  synth->add_option("--k", spec.k_true, "Planted clusters");
  synth->add_option("--delta", spec.separation, "Separation in [0, 1]");
  synth->add_option("--seed", spec.seed, "Seed");
  synth->add_flag("--severity", severity, "Append a Severity target linked to the clusters");

  std::string render_dir;
  auto* render = app.add_subcommand("render", "Draw SVG plots from an artifact directory");
  render->add_option("--out,--dir", render_dir, "Artifact directory")->required();

  int cluster = 0;
  auto* explain = app.add_subcommand("explain", "Re-run SHAP for one cluster from its saved model");
  explain->add_option("--config", config_path, "Config used by analyze")
      ->required()
      ->check(CLI::ExistingFile);
  explain->add_option("--cluster", cluster, "Cluster number (1-based)")->required();
  std::string explain_out;
  explain->add_option("--out", explain_out, "Directory for the new SHAP files");
  explain->add_option("--seed", overrides.seed, "Seed (overrides config)");
  explain->add_option("--threads", overrides.threads, "Worker threads")->check(CLI::PositiveNumber);
  explain->add_option("--artifacts", overrides.out, "Analyze output (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::ostream* log = verbose ? &std::cerr : nullptr;
  try {
    if (*analyze) {
      const auto config = Configure(config_path, overrides);
      const auto result = Analyze(config, log);
      if (!no_render) RenderPlots(result.output);
      std::cout << "K = " << result.k << "; artifacts in " << result.output.string() << "\n";
    } else if (*synth) {
      if (!spec_path.empty()) {
        try {
          spec = PlantedSpecFromJson(nlohmann::json::parse(ReadFile(spec_path)));
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(spec_path + ": " + e.what());
        }
      } else {
        spec.categories_per_variable = categories;
        if (severity) {
          spec.severity_link =
              DefaultLink(spec.k_true, static_cast<int>(spec.severity_classes.size()));
        }
      }
      WriteSynth(spec, synth_out);
      std::cout << "wrote " << spec.n << " rows to " << synth_out << "\n";
    } else if (*render) {
      for (const auto& path : RenderPlots(render_dir)) std::cout << path.string() << "\n";
    } else if (*explain) {
      const auto config = Configure(config_path, overrides);
      const fs::path out = explain_out.empty() ? fs::path(config.output) / "explain" : fs::path(explain_out);
      ExplainSaved(config, cluster, out, log);
      std::cout << "wrote shap_cluster_" << cluster << " to " << out.string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what();
    if (e.row() > 0) std::cerr << " (row " << e.row();
    if (e.row() > 0 && e.column() > 0) std::cerr << ", column " << e.column();
    if (e.row() > 0) std::cerr << ")";
    std::cerr << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return 0;
}
