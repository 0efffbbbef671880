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

#include "ccashap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccashap/csv.hpp"
#include "ccashap/ensembles.hpp"
#include "ccashap/errors.hpp"
#include "ccashap/random.hpp"
#include "ccashap/shap.hpp"

namespace ccashap {
namespace fs = std::filesystem;
namespace {

class Stopwatch {
 public:
  double Lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void Log(std::ostream* log, const std::string& message) {
  if (log) *log << "[ccashap] " << message << '\n';
}

std::string ShapBaseName(int cluster) { return "shap_cluster_" + std::to_string(cluster); }

struct ClusterExplanation {
  std::string csv;
  std::string sidecar;
};

// Severity model inputs for the rows of one cluster.
struct ClusterData {
  CategoricalDataset ds;
  IndicatorMatrix x;
  std::vector<Index> row_ids;
};

ClusterData SliceCluster(const CategoricalDataset& ds, const Labels& assign, int cluster,
                         std::span<const std::string> explained) {
  ClusterData out;
  for (Index i = 0; i < static_cast<Index>(assign.size()); ++i) {
    if (assign[i] == cluster) out.row_ids.push_back(i);
  }
  out.ds = ds.SelectRows(out.row_ids);
  out.x = Indicator(out.ds, explained);
  return out;
}

TreeEnsemble TrainSeverityModel(const PipelineConfig& config, const IndicatorMatrix& x,
                                const Labels& y, std::span<const std::string> classes,
                                std::uint64_t seed) {
  if (config.model == EnsembleKind::kRandomForest) {
    RandomForestParams p = config.rf;
    p.seed = seed;
    p.threads = config.threads;
    return TrainRandomForest(x, y, classes, p);
  }
  GradientBoostingParams p = config.gb;
  p.seed = seed;
  p.threads = config.threads;
  return TrainGradientBoosting(x, y, classes, p);
}

ClusterExplanation ExplainCluster(const PipelineConfig& config, const TreeEnsemble& model,
                                  const ClusterData& data, int cluster,
                                  const std::string& model_file) {
  const std::uint64_t bg_seed =
      DeriveSeed(*config.seed, "shap-bg", static_cast<std::uint64_t>(cluster));
  const auto bg = SampleBackground(data.x.z, config.background_size, bg_seed);
  const auto summary = ShapSummary(model, data.x.z, data.row_ids, bg, config.class_mode,
                                   config.threads, config.algorithm);
  auto sidecar = ShapSidecar(summary);
  sidecar["cluster"] = cluster;
  sidecar["model"] = model_file;
  sidecar["algorithm"] =
      config.algorithm == ShapAlgorithm::kTreePaths ? "tree-paths" : "coalitions";
  return {FormatShapCsv(summary), sidecar.dump(2) + "\n"};
}

std::vector<std::string> ExplainedVariables(const CategoricalDataset& ds,
                                            const std::vector<std::string>& selected) {
  std::vector<std::string> out;
  for (const auto& name : selected) {
    if (!ds.schema.target || name != *ds.schema.target) out.push_back(name);
  }
  if (static_cast<int>(out.size()) > kMaxShapPlayers) {
    throw ConfigError(std::to_string(out.size()) + " explanatory variables exceed the exact " +
                      "Shapley budget of " + std::to_string(kMaxShapPlayers) +
                      "; tighten screening");
  }
  return out;
}

Labels ReadClusters(const fs::path& path, Index rows) {
  const auto records = csv::Parse(ReadFile(path));
  if (records.empty() || records[0] != csv::Record{"row_id", "cluster"}) {
    throw DataError(path.string() + ": expected header row_id,cluster", 1);
  }
  if (static_cast<Index>(records.size()) - 1 != rows) {
    throw DataError(path.string() + " does not match the input row count");
  }
  Labels assign(rows);
  for (Index i = 0; i < rows; ++i) {
    const auto& rec = records[i + 1];
    if (rec.size() != 2 || rec[0] != std::to_string(i)) {
      throw DataError(path.string() + ": malformed row", i + 2);
    }
    assign[i] = std::stoi(rec[1]) - 1;
  }
  return assign;
}

}  // namespace

std::string Digest(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string FormatNumber(double value) {
  if (value == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFile(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

PreparedData PrepareData(const PipelineConfig& config) {
  CsvLoadOptions options;
  options.mode = config.schema_mode;
  if (config.schema_mode == SchemaMode::kDeclared) {
    Schema schema = LoadSchema(config.schema);
    if (config.target) {
      if (schema.target && *schema.target != *config.target) {
        throw ConfigError("config target '" + *config.target + "' differs from schema target '" +
                          *schema.target + "'");
      }
      schema.target = config.target;
      schema.Validate();
    }
    options.schema = std::move(schema);
  } else {
    options.target = config.target;
  }
  PreparedData out;
  out.raw = LoadCsv(config.input, options);
  out.filtered = SkewFilter(out.raw, config.skew_threshold);
  return out;
}

std::string FormatElbowCsv(std::span<const ElbowPoint> points, int knee) {
  std::string out = csv::FormatRecord(
      {"k", "normalized_wcss", "wcss", "tss", "embedding_normalized_wcss", "nested_split", "knee"});
  for (const auto& p : points) {
    out += csv::FormatRecord({std::to_string(p.k), FormatNumber(p.normalized_wcss),
                              FormatNumber(p.wcss), FormatNumber(p.tss),
                              FormatNumber(p.embedding_normalized_wcss),
                              p.nested_split ? "1" : "0", p.k == knee ? "1" : "0"});
  }
  return out;
}

std::string FormatClustersCsv(const Labels& assign) {
  std::string out = "row_id,cluster\n";
  for (std::size_t i = 0; i < assign.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(assign[i] + 1) + "\n";
  }
  return out;
}

std::string FormatCentroidTable(const CcaSolution& solution) {
  const std::vector<std::string> header = {"Cluster", "Dim 1", "Dim 2",
                                           "Within Cluster Sum of Squares", "Size"};
  std::vector<std::vector<std::string>> rows;
  const double scale = solution.gamma * solution.gamma;
  for (int k = 0; k < solution.k; ++k) {
    char d1[32], d2[32], w[32];
    std::snprintf(d1, sizeof d1, "%.4f", solution.centroids_star(k, 0));
    if (solution.centroids_star.cols() > 1) {
      std::snprintf(d2, sizeof d2, "%.4f", solution.centroids_star(k, 1));
    } else {
      std::snprintf(d2, sizeof d2, "n/a");
    }
    std::snprintf(w, sizeof w, "%.4f", scale * solution.cluster_wcss[k]);
    rows.push_back({std::to_string(k + 1), d1, d2, w, std::to_string(solution.sizes[k])});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  // Columns are separated by two spaces, so single-space header names stay
  // unambiguous.
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) s += "  ";
      const std::size_t pad = width[c] - cells[c].size();
      s += c == 0 ? cells[c] + std::string(pad, ' ') : std::string(pad, ' ') + cells[c];
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  for (const auto& r : rows) out += line(r);
  return out;
}

nlohmann::json CentroidsToJson(const CcaSolution& s) {
  nlohmann::json clusters = nlohmann::json::array();
  const double n = static_cast<double>(s.assign.size());
  for (int k = 0; k < s.k; ++k) {
    std::vector<double> g(s.centroids.cols()), g_star(s.centroids_star.cols());
    for (Index d = 0; d < s.centroids.cols(); ++d) g[d] = s.centroids(k, d);
    for (Index d = 0; d < s.centroids_star.cols(); ++d) g_star[d] = s.centroids_star(k, d);
    clusters.push_back({{"cluster", k + 1},
                        {"size", s.sizes[k]},
                        {"share", static_cast<double>(s.sizes[k]) / n},
                        {"centroid", g},
                        {"centroid_rescaled", g_star},
                        {"wcss", s.cluster_wcss[k]},
                        {"wcss_rescaled", s.gamma * s.gamma * s.cluster_wcss[k]}});
  }
  std::vector<double> sigma(s.ca.singular_values.data(),
                            s.ca.singular_values.data() + s.ca.singular_values.size());
  return {{"k", s.k},
          {"n", s.assign.size()},
          {"dims", s.dims()},
          {"variables", s.variables},
          {"gamma", s.gamma},
          {"rescaled", s.rescaled},
          {"singular_values", sigma},
          {"wcss", s.wcss},
          {"tss", s.tss},
          {"normalized_wcss", s.normalized_wcss()},
          {"iterations", s.iterations},
          {"restarts_used", s.restarts_used},
          {"best_restart", s.best_restart},
          {"seed", s.seed},
          {"diagnostics", s.diagnostics},
          {"clusters", clusters}};
}

std::string FormatBiplotCsv(const CcaSolution& solution, const IndicatorMatrix& z,
                            const std::optional<SupplementaryProjection>& supplementary) {
  auto dims = [](const auto& row) {
    return std::pair{FormatNumber(row(0)), row.size() > 1 ? FormatNumber(row(1)) : "0"};
  };
  std::string out = csv::FormatRecord({"label", "kind", "dim1", "dim2"});
  const auto labels = z.ColumnLabels();
  for (Index j = 0; j < solution.b_star.rows(); ++j) {
    const auto [a, b] = dims(solution.b_star.row(j));
    out += csv::FormatRecord({labels[j], "category", a, b});
  }
  for (int k = 0; k < solution.k; ++k) {
    const auto [a, b] = dims(solution.centroids_star.row(k));
    out += csv::FormatRecord({"Cluster " + std::to_string(k + 1), "centroid", a, b});
  }
  if (supplementary) {
    for (const auto& p : supplementary->points) {
      const auto [a, b] = dims(p.coords);
      out += csv::FormatRecord({supplementary->variable + ":" + p.category, "supplementary", a, b});
    }
  }
  return out;
}

AnalysisResult Analyze(const PipelineConfig& config, std::ostream* log) {
  ValidateConfig(config);
  const std::uint64_t seed = *config.seed;
  const fs::path out_dir = config.output;
  fs::create_directories(out_dir);

  Stopwatch clock;
  std::vector<std::pair<std::string, double>> timings;
  nlohmann::json stages = nlohmann::json::array();
  nlohmann::json artifacts = nlohmann::json::object();
  auto emit = [&](const std::string& name, const std::string& bytes) {
    WriteFile(out_dir / name, bytes);
    artifacts[name] = Digest(bytes);
    return artifacts[name];
  };

  // Load and filter.
  Log(log, "loading " + config.input);
  const std::string input_digest = Digest(ReadFile(config.input));
  const PreparedData data = PrepareData(config);
  const auto& ds = data.filtered.dataset;
  stages.push_back({{"name", "load"},
                    {"inputs", {{"input", input_digest}}},
                    {"outputs", {{"dataset", Digest(FormatCsv(data.raw))}}}});
  timings.emplace_back("load", clock.Lap());
  Log(log, std::to_string(data.raw.rows()) + " rows, " +
               std::to_string(data.raw.variable_count()) + " variables");
  const auto filter_digest =
      emit("filter_report.json", FilterReportToJson(data.filtered.report).dump(2) + "\n");
  stages.push_back({{"name", "skew_filter"},
                    {"inputs", {{"dataset", Digest(FormatCsv(data.raw))}}},
                    {"outputs",
                     {{"filter_report.json", filter_digest}, {"dataset", Digest(FormatCsv(ds))}}}});
  timings.emplace_back("skew_filter", clock.Lap());

  // Screening.
  std::vector<std::string> candidates;
  for (const auto& v : ds.schema.variables) {
    if (!ds.schema.target || v.name != *ds.schema.target) candidates.push_back(v.name);
  }
  std::vector<std::string> selected = candidates;
  nlohmann::json screening;
  if (ds.schema.target && config.screening) {
    Log(log, "screening " + std::to_string(candidates.size()) + " variables");
    ScreeningParams params;
    params.folds = config.folds;
    params.rf = config.rf;
    params.gb = config.gb;
    params.rule = config.consensus;
    params.seed = DeriveSeed(seed, "screening", 0);
    params.threads = config.threads;
    const auto report = ConsensusSelect(ds, *ds.schema.target, params);
    screening = ScreeningReportToJson(report);
    screening["skipped"] = false;
    if (report.degenerate) {
      screening["note"] = "single observed class; every variable kept";
    } else {
      selected = report.Selected();
      if (selected.empty()) throw DataError("screening retained no variables");
    }
  } else {
    screening = {{"skipped", true},
                 {"reason", ds.schema.target ? "disabled in config" : "no target variable"},
                 {"variables", candidates}};
  }
  screening["selected"] = selected;
  const auto screening_digest = emit("screening_report.json", screening.dump(2) + "\n");
  stages.push_back({{"name", "screening"},
                    {"inputs", {{"dataset", Digest(FormatCsv(ds))}}},
                    {"outputs", {{"screening_report.json", screening_digest}}}});
  timings.emplace_back("screening", clock.Lap());

  // Clustering.
  std::vector<std::string> active = selected;
  if (config.include_severity) active.push_back(*ds.schema.target);
  const IndicatorMatrix z = Indicator(ds, active);
  CcaOptions options;
  options.restarts = config.restarts;
  options.tol = config.tol;
  options.max_iter = config.max_iter;
  options.dims = config.dims;
  options.seed = DeriveSeed(seed, "cca", 0);
  options.threads = config.threads;
  CcaSolution solution;
  std::string elbow_csv;
  if (config.k_range) {
    std::vector<int> ks;
    for (int k = config.k_range->first; k <= config.k_range->second; ++k) ks.push_back(k);
    Log(log, "elbow over K = " + std::to_string(ks.front()) + ".." + std::to_string(ks.back()));
    auto curve = Elbow(z, ks, options);
    elbow_csv = FormatElbowCsv(curve.points, curve.knee);
    solution = std::move(curve.solutions[static_cast<std::size_t>(curve.knee - ks.front())]);
  } else {
    options.k = *config.k;
    Log(log, "clustering with K = " + std::to_string(options.k));
    solution = ClusterCa(z, options);
    const auto reference = ReferenceCoordinates(z);
    const double tss = PartitionScatter(reference, Labels(z.rows(), 0), 1);
    const double wcss = PartitionScatter(reference, solution.assign, solution.k);
    const ElbowPoint point{solution.k, tss > 0.0 ? wcss / tss : 1.0, wcss, tss,
                           solution.normalized_wcss(), false};
    elbow_csv = FormatElbowCsv(std::span(&point, 1), solution.k);
  }
  Log(log, "K = " + std::to_string(solution.k) + ", " + std::to_string(solution.iterations) +
               " alternations in the best restart");
  std::optional<SupplementaryProjection> overlay;
  if (ds.schema.target && !config.include_severity) {
    overlay = ProjectSupplementary(ds, *ds.schema.target, solution);
  }
  nlohmann::json cca_outputs;
  cca_outputs["elbow.csv"] = emit("elbow.csv", elbow_csv);
  cca_outputs["clusters.csv"] = emit("clusters.csv", FormatClustersCsv(solution.assign));
  auto centroids = CentroidsToJson(solution);
  if (overlay) centroids["supplementary_diagnostics"] = overlay->diagnostics;
  cca_outputs["centroids.json"] = emit("centroids.json", centroids.dump(2) + "\n");
  cca_outputs["centroids.txt"] = emit("centroids.txt", FormatCentroidTable(solution));
  cca_outputs["biplot.csv"] = emit("biplot.csv", FormatBiplotCsv(solution, z, overlay));
  stages.push_back({{"name", "cca"},
                    {"inputs", {{"dataset", Digest(FormatCsv(ds))},
                                {"screening_report.json", screening_digest}}},
                    {"outputs", cca_outputs}});
  timings.emplace_back("cca", clock.Lap());

  // Severity models and explanations.
  if (ds.schema.target) {
    const auto explained = ExplainedVariables(ds, selected);
    const auto& classes = ds.schema.variables[*ds.schema.TargetIndex()].categories;
    nlohmann::json shap_outputs;
    std::optional<TreeEnsemble> global;
    if (!config.per_cluster) {
      const IndicatorMatrix x = Indicator(ds, explained);
      global = TrainSeverityModel(config, x, ds.TargetCodes(), classes,
                                  DeriveSeed(seed, "model", 0));
      shap_outputs["model_global.json"] =
          emit("model_global.json", EnsembleToJson(*global).dump(2) + "\n");
    }
    for (int k = 0; k < solution.k; ++k) {
      const int cluster = k + 1;
      const ClusterData slice = SliceCluster(ds, solution.assign, k, explained);
      Log(log, "explaining cluster " + std::to_string(cluster) + " (" +
                   std::to_string(slice.row_ids.size()) + " rows)");
      std::string model_file = "model_global.json";
      TreeEnsemble model;
      if (global) {
        model = *global;
      } else {
        if (slice.row_ids.size() < 2) {
          throw DataError("cluster " + std::to_string(cluster) +
                          " has a single observation; no severity model can be trained");
        }
        model = TrainSeverityModel(config, slice.x, slice.ds.TargetCodes(), classes,
                                   DeriveSeed(seed, "model", static_cast<std::uint64_t>(cluster)));
        model_file = "model_cluster_" + std::to_string(cluster) + ".json";
        shap_outputs[model_file] = emit(model_file, EnsembleToJson(model).dump(2) + "\n");
      }
      const auto explanation = ExplainCluster(config, model, slice, cluster, model_file);
      const auto base = ShapBaseName(cluster);
      shap_outputs[base + ".csv"] = emit(base + ".csv", explanation.csv);
      shap_outputs[base + ".json"] = emit(base + ".json", explanation.sidecar);
    }
    stages.push_back({{"name", "explain"},
                      {"inputs", {{"clusters.csv", cca_outputs["clusters.csv"]}}},
                      {"outputs", shap_outputs}});
  } else {
    Log(log, "no target variable: severity models and explanations skipped");
  }
  timings.emplace_back("explain", clock.Lap());

  nlohmann::json manifest = {{"tool", "ccashap"},
                             {"version", CCASHAP_VERSION},
                             {"config", ConfigToJson(config)},
                             {"rows", ds.rows()},
                             {"k", solution.k},
                             {"selected_variables", selected},
                             {"stages", stages},
                             {"artifacts", artifacts}};
  WriteFile(out_dir / "manifest.json", manifest.dump(2) + "\n");
  std::string timing_text;
  for (const auto& [stage, seconds] : timings) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", seconds);
    timing_text += stage + " " + buf + "\n";
  }
  WriteFile(out_dir / "timings.txt", timing_text);

  AnalysisResult result;
  result.output = out_dir;
  result.k = solution.k;
  result.selected = selected;
  result.manifest = std::move(manifest);
  return result;
}

void ExplainSaved(const PipelineConfig& config, int cluster, const fs::path& out_dir,
                  std::ostream* log) {
  ValidateConfig(config);
  const fs::path artifacts = config.output;
  const PreparedData data = PrepareData(config);
  const auto& ds = data.filtered.dataset;
  if (!ds.schema.target) throw ConfigError("explain needs a target variable");
  const Labels assign = ReadClusters(artifacts / "clusters.csv", ds.rows());
  const int k = *std::max_element(assign.begin(), assign.end()) + 1;
  if (cluster < 1 || cluster > k) {
    throw ConfigError("cluster must lie in 1.." + std::to_string(k));
  }
  std::string model_file = "model_cluster_" + std::to_string(cluster) + ".json";
  if (!config.per_cluster) model_file = "model_global.json";
  Log(log, "reloading " + (artifacts / model_file).string());
  TreeEnsemble model;
  try {
    model = EnsembleFromJson(nlohmann::json::parse(ReadFile(artifacts / model_file)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(model_file + ": " + e.what());
  }
  const ClusterData slice = SliceCluster(ds, assign, cluster - 1, model.variables);
  if (slice.x.ColumnLabels() != model.columns) {
    throw DataError(model_file + " was trained on different categories than the input");
  }
  const auto explanation = ExplainCluster(config, model, slice, cluster, model_file);
  fs::create_directories(out_dir);
  WriteFile(out_dir / (ShapBaseName(cluster) + ".csv"), explanation.csv);
  WriteFile(out_dir / (ShapBaseName(cluster) + ".json"), explanation.sidecar);
}

}  // namespace ccashap
