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

#ifndef CCASHAP_DATASET_HPP_
#define CCASHAP_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace ccashap {

using Index = Eigen::Index;
using Labels = std::vector<int>;
using CodeMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct Variable {
  std::string name;
  std::vector<std::string> categories;

  std::optional<int> CategoryIndex(std::string_view category) const;
};

// Ordered variable roster. Names and categories compare by exact bytes.
struct Schema {
  std::vector<Variable> variables;
  // Variable holding the outcome classes; it is an ordinary column of the
  // data but never clustered actively or dropped by the skew filter.
  std::optional<std::string> target;

  // Throws DataError on duplicate names, fewer than two categories, duplicate
  // categories, or a target that is not a variable.
  void Validate() const;

  std::optional<std::size_t> VariableIndex(std::string_view name) const;
  std::size_t RequireVariable(std::string_view name) const;
  std::optional<std::size_t> TargetIndex() const;
  std::vector<std::string> VariableNames() const;
};

nlohmann::json SchemaToJson(const Schema& schema);
Schema SchemaFromJson(const nlohmann::json& json);
Schema LoadSchema(const std::filesystem::path& path);

struct CategoricalDataset {
  Schema schema;
  // n x Q category indices, column v indexing schema.variables[v].categories.
  CodeMatrix codes;

  Index rows() const { return codes.rows(); }
  Index variable_count() const { return codes.cols(); }

  void Validate() const;

  // Target class index per row; throws if the schema has no target.
  Labels TargetCodes() const;
  std::vector<std::string> TargetValues() const;

  // Keeps the listed variables (schema order is preserved, listing order is
  // not). The target is retained when present in `names`.
  CategoricalDataset SelectVariables(std::span<const std::string> names) const;
  CategoricalDataset SelectRows(std::span<const Index> row_ids) const;
};

bool operator==(const Variable& a, const Variable& b);
bool operator==(const Schema& a, const Schema& b);
bool operator==(const CategoricalDataset& a, const CategoricalDataset& b);

enum class SchemaMode { kDeclared, kInfer };

struct CsvLoadOptions {
  SchemaMode mode = SchemaMode::kInfer;
  // Required in declared mode; CSV header columns may appear in any order but
  // must cover exactly the schema's variables.
  std::optional<Schema> schema;
  // Infer mode only; declared mode takes the target from the schema.
  std::optional<std::string> target;
};

// Reads an RFC-4180 CSV with a header row. Blank cells are errors. In infer
// mode categories are numbered by first appearance.
CategoricalDataset LoadCsv(const std::filesystem::path& path,
                           const CsvLoadOptions& options = {});
CategoricalDataset ParseCsv(std::string_view text,
                            const CsvLoadOptions& options = {});

std::string FormatCsv(const CategoricalDataset& ds);
void WriteCsv(const CategoricalDataset& ds, const std::filesystem::path& path);

struct FilterEntry {
  std::string variable;
  std::string modal_category;
  double modal_share = 0.0;
  bool kept = true;
};

struct FilterReport {
  double threshold = 0.85;
  std::vector<FilterEntry> entries;
};

nlohmann::json FilterReportToJson(const FilterReport& report);

struct FilterResult {
  CategoricalDataset dataset;
  FilterReport report;
};

// Drops every non-target variable whose most frequent category covers
// strictly more than `threshold` of the rows. Ties between modal categories
// report the first in category order.
FilterResult SkewFilter(const CategoricalDataset& ds, double threshold = 0.85);

// One-hot super-indicator matrix of the active variables.
struct IndicatorMatrix {
  struct Block {
    std::string name;
    std::size_t variable = 0;  // index into the source schema
    Index offset = 0;
    Index size = 0;
    std::vector<std::string> categories;
  };

  Eigen::MatrixXd z;
  std::vector<Block> blocks;

  Index rows() const { return z.rows(); }
  Index cols() const { return z.cols(); }
  Index q() const { return static_cast<Index>(blocks.size()); }

  // "Variable:Category" for every column.
  std::vector<std::string> ColumnLabels() const;
  // Block index owning column j.
  std::size_t BlockOfColumn(Index j) const;
};

// Columns follow schema order regardless of the order of `active_vars`.
IndicatorMatrix Indicator(const CategoricalDataset& ds,
                          std::span<const std::string> active_vars);

// Encodes one row of category codes against the blocks of `layout`.
Eigen::RowVectorXd EncodeRow(const IndicatorMatrix& layout,
                             const CategoricalDataset& ds, Index row);

struct ContingencyMatrix {
  CountMatrix counts;  // K x J
  std::int64_t grand_total = 0;
};

// counts(k, j) = number of rows labelled k with indicator column j set.
ContingencyMatrix Contingency(const IndicatorMatrix& z, std::span<const int> assign,
                              int k);

}  // namespace ccashap

#endif  // CCASHAP_DATASET_HPP_
