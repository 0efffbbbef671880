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

#include "ccashap/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ccashap/csv.hpp"
#include "ccashap/errors.hpp"

namespace ccashap {

std::optional<int> Variable::CategoryIndex(std::string_view category) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == category) return static_cast<int>(i);
  }
  return std::nullopt;
}

void Schema::Validate() const {
  std::set<std::string> names;
  for (const auto& v : variables) {
    if (v.name.empty()) throw DataError("variable with empty name");
    if (!names.insert(v.name).second) {
      throw DataError("duplicate variable name '" + v.name + "'");
    }
    if (v.categories.size() < 2) {
      throw DataError("variable '" + v.name + "' has fewer than 2 categories");
    }
    std::set<std::string> cats(v.categories.begin(), v.categories.end());
    if (cats.size() != v.categories.size()) {
      throw DataError("variable '" + v.name + "' has duplicate categories");
    }
  }
  if (target && !VariableIndex(*target)) {
    throw DataError("target '" + *target + "' is not a variable");
  }
}

std::optional<std::size_t> Schema::VariableIndex(std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::RequireVariable(std::string_view name) const {
  auto idx = VariableIndex(name);
  if (!idx) throw ConfigError("unknown variable '" + std::string(name) + "'");
  return *idx;
}

std::optional<std::size_t> Schema::TargetIndex() const {
  if (!target) return std::nullopt;
  return VariableIndex(*target);
}

std::vector<std::string> Schema::VariableNames() const {
  std::vector<std::string> names;
  names.reserve(variables.size());
  for (const auto& v : variables) names.push_back(v.name);
  return names;
}

nlohmann::json SchemaToJson(const Schema& schema) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : schema.variables) {
    vars.push_back({{"name", v.name}, {"categories", v.categories}});
  }
  nlohmann::json out = {{"variables", vars}};
  out["target"] = schema.target ? nlohmann::json(*schema.target) : nlohmann::json();
  return out;
}

Schema SchemaFromJson(const nlohmann::json& json) {
  Schema schema;
  try {
    for (const auto& v : json.at("variables")) {
      schema.variables.push_back(
          {v.at("name").get<std::string>(),
           v.at("categories").get<std::vector<std::string>>()});
    }
    if (json.contains("target") && !json.at("target").is_null()) {
      schema.target = json.at("target").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schema: ") + e.what());
  }
  schema.Validate();
  return schema;
}

Schema LoadSchema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file " + path.string());
  try {
    return SchemaFromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
}

void CategoricalDataset::Validate() const {
  schema.Validate();
  if (rows() < 1) throw DataError("dataset has no rows");
  if (variable_count() != static_cast<Index>(schema.variables.size())) {
    throw DataError("code matrix width does not match schema");
  }
  for (Index v = 0; v < variable_count(); ++v) {
    const int m = static_cast<int>(schema.variables[v].categories.size());
    for (Index i = 0; i < rows(); ++i) {
      if (codes(i, v) < 0 || codes(i, v) >= m) {
        throw DataError("category index out of range", i + 1, v + 1);
      }
    }
  }
}

Labels CategoricalDataset::TargetCodes() const {
  const auto t = schema.TargetIndex();
  if (!t) throw ConfigError("dataset has no target variable");
  Labels out(rows());
  for (Index i = 0; i < rows(); ++i) out[i] = codes(i, *t);
  return out;
}

std::vector<std::string> CategoricalDataset::TargetValues() const {
  const auto t = schema.TargetIndex();
  if (!t) throw ConfigError("dataset has no target variable");
  std::vector<std::string> out;
  out.reserve(rows());
  for (Index i = 0; i < rows(); ++i) {
    out.push_back(schema.variables[*t].categories[codes(i, *t)]);
  }
  return out;
}

CategoricalDataset CategoricalDataset::SelectVariables(
    std::span<const std::string> names) const {
  std::vector<std::size_t> keep;
  for (const auto& name : names) keep.push_back(schema.RequireVariable(name));
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());

  CategoricalDataset out;
  out.codes.resize(rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.schema.variables.push_back(schema.variables[keep[c]]);
    out.codes.col(static_cast<Index>(c)) = codes.col(static_cast<Index>(keep[c]));
  }
  if (schema.target && out.schema.VariableIndex(*schema.target)) {
    out.schema.target = schema.target;
  }
  return out;
}

CategoricalDataset CategoricalDataset::SelectRows(
    std::span<const Index> row_ids) const {
  CategoricalDataset out;
  out.schema = schema;
  out.codes.resize(static_cast<Index>(row_ids.size()), variable_count());
  for (std::size_t r = 0; r < row_ids.size(); ++r) {
    out.codes.row(static_cast<Index>(r)) = codes.row(row_ids[r]);
  }
  return out;
}

bool operator==(const Variable& a, const Variable& b) {
  return a.name == b.name && a.categories == b.categories;
}

bool operator==(const Schema& a, const Schema& b) {
  return a.variables == b.variables && a.target == b.target;
}

bool operator==(const CategoricalDataset& a, const CategoricalDataset& b) {
  return a.schema == b.schema && a.codes.rows() == b.codes.rows() &&
         a.codes.cols() == b.codes.cols() && a.codes == b.codes;
}

CategoricalDataset ParseCsv(std::string_view text, const CsvLoadOptions& options) {
  const auto records = csv::Parse(text);
  if (records.empty()) throw DataError("empty CSV: no header row");
  const auto& header = records.front();
  const std::size_t width = header.size();
  if (records.size() < 2) throw DataError("CSV has a header but no data rows");

  CategoricalDataset ds;
  // column_var[c] = schema variable fed by CSV column c.
  std::vector<std::size_t> column_var(width);

  if (options.mode == SchemaMode::kDeclared) {
    if (!options.schema) throw ConfigError("declared schema mode requires a schema");
    ds.schema = *options.schema;
    ds.schema.Validate();
    if (width != ds.schema.variables.size()) {
      throw DataError("CSV header has " + std::to_string(width) +
                          " columns, schema declares " +
                          std::to_string(ds.schema.variables.size()),
                      1);
    }
    std::set<std::size_t> seen;
    for (std::size_t c = 0; c < width; ++c) {
      auto idx = ds.schema.VariableIndex(header[c]);
      if (!idx) {
        throw DataError("header column '" + header[c] + "' is not in the schema", 1,
                        c + 1);
      }
      if (!seen.insert(*idx).second) {
        throw DataError("duplicate header column '" + header[c] + "'", 1, c + 1);
      }
      column_var[c] = *idx;
    }
  } else {
    for (std::size_t c = 0; c < width; ++c) {
      if (header[c].empty()) throw DataError("empty header name", 1, c + 1);
      ds.schema.variables.push_back({header[c], {}});
      column_var[c] = c;
    }
    ds.schema.target = options.target;
  }

  const Index n = static_cast<Index>(records.size() - 1);
  ds.codes.resize(n, static_cast<Index>(width));
  for (Index i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i) + 1];
    const std::size_t file_row = static_cast<std::size_t>(i) + 2;
    if (rec.size() != width) {
      throw DataError("ragged row: expected " + std::to_string(width) +
                          " fields, found " + std::to_string(rec.size()),
                      file_row);
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto& value = rec[c];
      if (value.empty()) {
        throw DataError("blank cell in column '" + header[c] + "'", file_row, c + 1);
      }
      auto& var = ds.schema.variables[column_var[c]];
      auto code = var.CategoryIndex(value);
      if (!code) {
        if (options.mode == SchemaMode::kDeclared) {
          throw DataError("unknown category '" + value + "' for variable '" + var.name + "'",
                          file_row, c + 1);
        }
        var.categories.push_back(value);
        code = static_cast<int>(var.categories.size()) - 1;
      }
      ds.codes(i, static_cast<Index>(column_var[c])) = *code;
    }
  }
  ds.Validate();
  return ds;
}

CategoricalDataset LoadCsv(const std::filesystem::path& path,
                           const CsvLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseCsv(buffer.str(), options);
}

std::string FormatCsv(const CategoricalDataset& ds) {
  std::string out = csv::FormatRecord(ds.schema.VariableNames());
  csv::Record rec(static_cast<std::size_t>(ds.variable_count()));
  for (Index i = 0; i < ds.rows(); ++i) {
    for (Index v = 0; v < ds.variable_count(); ++v) {
      rec[v] = ds.schema.variables[v].categories[ds.codes(i, v)];
    }
    out += csv::FormatRecord(rec);
  }
  return out;
}

void WriteCsv(const CategoricalDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << FormatCsv(ds);
}

nlohmann::json FilterReportToJson(const FilterReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"variable", e.variable},
                       {"modal_category", e.modal_category},
                       {"modal_share", e.modal_share},
                       {"kept", e.kept}});
  }
  return {{"threshold", report.threshold}, {"variables", entries}};
}

FilterResult SkewFilter(const CategoricalDataset& ds, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("skew threshold must lie in (0, 1)");
  }
  const auto target = ds.schema.TargetIndex();
  FilterReport report;
  report.threshold = threshold;
  std::vector<std::string> kept;
  bool any_explanatory = false;
  for (Index v = 0; v < ds.variable_count(); ++v) {
    const auto& var = ds.schema.variables[v];
    std::vector<Index> counts(var.categories.size(), 0);
    for (Index i = 0; i < ds.rows(); ++i) ++counts[ds.codes(i, v)];
    const auto modal = std::max_element(counts.begin(), counts.end());
    FilterEntry entry;
    entry.variable = var.name;
    entry.modal_category = var.categories[modal - counts.begin()];
    entry.modal_share = static_cast<double>(*modal) / static_cast<double>(ds.rows());
    const bool is_target = target && *target == static_cast<std::size_t>(v);
    entry.kept = is_target || !(entry.modal_share > threshold);
    if (entry.kept) {
      kept.push_back(var.name);
      any_explanatory = any_explanatory || !is_target;
    }
    report.entries.push_back(std::move(entry));
  }
  if (!any_explanatory) {
    throw DataError("skew filter dropped every explanatory variable");
  }
  return {ds.SelectVariables(kept), std::move(report)};
}

std::vector<std::string> IndicatorMatrix::ColumnLabels() const {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(cols()));
  for (const auto& b : blocks) {
    for (const auto& c : b.categories) labels.push_back(b.name + ":" + c);
  }
  return labels;
}

std::size_t IndicatorMatrix::BlockOfColumn(Index j) const {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (j >= blocks[b].offset && j < blocks[b].offset + blocks[b].size) return b;
  }
  throw std::out_of_range("indicator column out of range");
}

IndicatorMatrix Indicator(const CategoricalDataset& ds,
                          std::span<const std::string> active_vars) {
  if (active_vars.empty()) throw ConfigError("no active variables");
  std::vector<std::size_t> vars;
  for (const auto& name : active_vars) vars.push_back(ds.schema.RequireVariable(name));
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());

  IndicatorMatrix out;
  Index offset = 0;
  for (auto v : vars) {
    const auto& var = ds.schema.variables[v];
    out.blocks.push_back({var.name, v, offset, static_cast<Index>(var.categories.size()),
                          var.categories});
    offset += static_cast<Index>(var.categories.size());
  }
  out.z = Eigen::MatrixXd::Zero(ds.rows(), offset);
  for (const auto& b : out.blocks) {
    for (Index i = 0; i < ds.rows(); ++i) {
      out.z(i, b.offset + ds.codes(i, static_cast<Index>(b.variable))) = 1.0;
    }
  }
  return out;
}

Eigen::RowVectorXd EncodeRow(const IndicatorMatrix& layout,
                             const CategoricalDataset& ds, Index row) {
  Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(layout.cols());
  for (const auto& b : layout.blocks) {
    const auto v = ds.schema.RequireVariable(b.name);
    const auto& cat = ds.schema.variables[v].categories[ds.codes(row, static_cast<Index>(v))];
    auto pos = std::find(b.categories.begin(), b.categories.end(), cat);
    if (pos == b.categories.end()) {
      throw DataError("category '" + cat + "' of '" + b.name + "' unknown to model",
                      static_cast<std::size_t>(row) + 2, v + 1);
    }
    x(b.offset + (pos - b.categories.begin())) = 1.0;
  }
  return x;
}

ContingencyMatrix Contingency(const IndicatorMatrix& z, std::span<const int> assign,
                              int k) {
  if (k < 1) throw ConfigError("cluster count must be positive");
  if (static_cast<Index>(assign.size()) != z.rows()) {
    throw ConfigError("assignment length does not match row count");
  }
  ContingencyMatrix out;
  out.counts = CountMatrix::Zero(k, z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    const int label = assign[static_cast<std::size_t>(i)];
    if (label < 0 || label >= k) {
      throw ConfigError("cluster label " + std::to_string(label) + " out of range");
    }
    for (Index j = 0; j < z.cols(); ++j) {
      if (z.z(i, j) != 0.0) ++out.counts(label, j);
    }
  }
  out.grand_total = out.counts.sum();
  return out;
}

}  // namespace ccashap
