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

#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "ccashap/csv.hpp"
#include "ccashap/errors.hpp"

namespace ccashap {
namespace {

Schema WeatherLight() {
  return {{{"Weather", {"Clear", "Rain"}}, {"Light", {"Day", "Dark"}}}, std::nullopt};
}

CsvLoadOptions Declared(Schema schema) {
  CsvLoadOptions o;
  o.mode = SchemaMode::kDeclared;
  o.schema = std::move(schema);
  return o;
}

// n rows of one variable with `modal` rows in category 0.
CategoricalDataset Skewed(int n, int modal) {
  CategoricalDataset ds;
  ds.schema.variables = {{"V", {"a", "b"}}, {"W", {"x", "y"}}};
  ds.codes.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    ds.codes(i, 0) = i < modal ? 0 : 1;
    ds.codes(i, 1) = i % 2;
  }
  return ds;
}

CategoricalDataset RandomDataset(int n, int q, int cats, unsigned seed) {
  std::mt19937 rng(seed);
  CategoricalDataset ds;
  for (int v = 0; v < q; ++v) {
    Variable var{"V" + std::to_string(v), {}};
    for (int c = 0; c < cats; ++c) var.categories.push_back("c" + std::to_string(c));
    ds.schema.variables.push_back(var);
  }
  ds.codes.resize(n, q);
  for (int i = 0; i < n; ++i)
    for (int v = 0; v < q; ++v) ds.codes(i, v) = static_cast<int>(rng() % cats);
  return ds;
}

TEST(CsvTest, QuotedFieldsAndLineEndings) {
  const auto recs = csv::Parse("a,\"b,c\"\r\n\"say \"\"hi\"\"\",\"multi\nline\"\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0], (csv::Record{"a", "b,c"}));
  EXPECT_EQ(recs[1], (csv::Record{"say \"hi\"", "multi\nline"}));
  EXPECT_THROW(csv::Parse("a,\"open\n"), DataError);
  EXPECT_EQ(csv::EscapeField("x\"y"), "\"x\"\"y\"");
}

TEST(LoadCsvTest, InferThreeRows) {
  const auto ds = ParseCsv("Weather,Light\nClear,Day\nRain,Dark\nClear,Dark\n");
  EXPECT_EQ(ds.rows(), 3);
  EXPECT_EQ(ds.variable_count(), 2);
  const std::vector<std::string> both = {"Weather", "Light"};
  EXPECT_EQ(Indicator(ds, both).cols(), 4);
  // First-appearance order.
  EXPECT_EQ(ds.schema.variables[1].categories, (std::vector<std::string>{"Day", "Dark"}));
  EXPECT_EQ(ds.codes(2, 1), 1);
}

TEST(LoadCsvTest, DeclaredOrderAndColumnPermutation) {
  const auto ds = ParseCsv("Light,Weather\nDark,Rain\nDay,Clear\n", Declared(WeatherLight()));
  EXPECT_EQ(ds.schema.variables[0].name, "Weather");
  EXPECT_EQ(ds.codes(0, 0), 1);
  EXPECT_EQ(ds.codes(0, 1), 1);
  EXPECT_EQ(ds.codes(1, 0), 0);
}

TEST(LoadCsvTest, UnknownCategoryNamesRowColumnValue) {
  try {
    ParseCsv("Weather,Light\nClear,Day\nSleet,Dark\n", Declared(WeatherLight()));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), 1u);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("Sleet"), std::string::npos);
    EXPECT_NE(msg.find("Weather"), std::string::npos);
  }
}

TEST(LoadCsvTest, ErrorCases) {
  EXPECT_THROW(ParseCsv(""), DataError);
  EXPECT_THROW(ParseCsv("A,B\nx,y\nx\n"), DataError);        // ragged
  EXPECT_THROW(ParseCsv("A,B\nx,y\nx,\nz,w\n"), DataError);  // blank cell
  EXPECT_THROW(ParseCsv("A,B\nx,y\nx,z\n"), DataError);      // A has one category
  EXPECT_THROW(LoadCsv("/nonexistent/file.csv"), DataError);
}

TEST(LoadCsvTest, WriteLoadRoundTrip) {
  auto ds = RandomDataset(40, 4, 3, 7);
  ds.schema.variables[2].categories[1] = "has,comma \"quoted\"";
  const auto dir = std::filesystem::temp_directory_path() / "ccashap_dataset_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "round.csv";
  WriteCsv(ds, path);
  const auto back = LoadCsv(path, Declared(ds.schema));
  EXPECT_TRUE(back == ds);
}

TEST(LoadCsvTest, OhioShapedHeaderHasTwentyOneVariables) {
  std::string text;
  for (int v = 0; v < 21; ++v) text += (v ? ",V" : "V") + std::to_string(v);
  text += "\n";
  for (int row = 0; row < 2; ++row) {
    for (int v = 0; v < 21; ++v) text += (v ? ",c" : "c") + std::to_string(row);
    text += "\n";
  }
  EXPECT_EQ(ParseCsv(text).variable_count(), 21);
}

TEST(SkewFilterTest, StrictInequalityBoundary) {
  EXPECT_FALSE(SkewFilter(Skewed(100, 86)).report.entries[0].kept);
  EXPECT_TRUE(SkewFilter(Skewed(100, 85)).report.entries[0].kept);
  EXPECT_TRUE(SkewFilter(Skewed(100, 84)).report.entries[0].kept);
  EXPECT_TRUE(SkewFilter(Skewed(20, 17)).report.entries[0].kept);  // 17/20 == 0.85
  const auto r = SkewFilter(Skewed(100, 50));
  EXPECT_TRUE(r.report.entries[0].kept);
  EXPECT_DOUBLE_EQ(r.report.entries[0].modal_share, 0.5);
  EXPECT_EQ(r.report.entries[0].modal_category, "a");  // tie -> first category
}

TEST(SkewFilterTest, TargetNeverDroppedAndAllDroppedIsError) {
  auto ds = Skewed(100, 95);
  ds.schema.target = "V";
  const auto r = SkewFilter(ds);
  EXPECT_TRUE(r.report.entries[0].kept);
  EXPECT_EQ(r.dataset.variable_count(), 2);

  auto all = Skewed(100, 95);
  for (int i = 0; i < 100; ++i) all.codes(i, 1) = i < 90 ? 0 : 1;
  EXPECT_THROW(SkewFilter(all), DataError);
  EXPECT_THROW(SkewFilter(Skewed(10, 5), 1.0), ConfigError);
}

TEST(SkewFilterTest, Idempotent) {
  auto ds = RandomDataset(60, 5, 3, 3);
  for (int i = 0; i < 60; ++i) ds.codes(i, 2) = i < 58 ? 0 : 1;
  const auto once = SkewFilter(ds);
  const auto twice = SkewFilter(once.dataset);
  EXPECT_TRUE(once.dataset == twice.dataset);
  EXPECT_EQ(once.dataset.variable_count(), 4);
  const auto json = FilterReportToJson(once.report);
  EXPECT_EQ(json["variables"][2]["kept"], false);
}

TEST(IndicatorTest, SingleVariableHandCase) {
  CategoricalDataset ds;
  ds.schema.variables = {{"A", {"x", "y", "z"}}};
  ds.codes.resize(3, 1);
  ds.codes << 0, 2, 1;
  const std::vector<std::string> a = {"A"};
  const auto z = Indicator(ds, a);
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0, 0, 0, 0, 1, 0, 1, 0;
  EXPECT_EQ(z.z, expected);
  EXPECT_EQ(z.q(), 1);
}

TEST(IndicatorTest, TwoByTwoEnumeration) {
  CategoricalDataset ds;
  ds.schema.variables = {{"A", {"a0", "a1"}}, {"B", {"b0", "b1"}}};
  ds.codes.resize(4, 2);
  ds.codes << 0, 0, 0, 1, 1, 0, 1, 1;
  // Reversed listing order must not change the column order.
  const std::vector<std::string> vars = {"B", "A"};
  const auto z = Indicator(ds, vars);
  Eigen::MatrixXd expected(4, 4);
  expected << 1, 0, 1, 0,
              1, 0, 0, 1,
              0, 1, 1, 0,
              0, 1, 0, 1;
  EXPECT_EQ(z.z, expected);
  EXPECT_EQ(z.ColumnLabels()[3], "B:b1");
  EXPECT_THROW(Indicator(ds, std::vector<std::string>{"C"}), ConfigError);
}

TEST(IndicatorTest, RowsSumToQ) {
  const auto ds = RandomDataset(50, 5, 4, 11);
  const auto names = ds.schema.VariableNames();
  const auto z = Indicator(ds, names);
  for (Index i = 0; i < z.rows(); ++i) EXPECT_EQ(z.z.row(i).sum(), 5.0);
  EXPECT_EQ(z.cols(), 20);
}

TEST(ContingencyTest, HandCountTwoClusters) {
  CategoricalDataset ds;
  ds.schema.variables = {{"A", {"a0", "a1"}}, {"B", {"b0", "b1"}}};
  ds.codes.resize(4, 2);
  ds.codes << 0, 0, 0, 1, 1, 0, 1, 1;
  const auto z = Indicator(ds, ds.schema.VariableNames());
  const Labels assign = {0, 1, 1, 0};
  const auto f = Contingency(z, assign, 2);
  CountMatrix expected(2, 4);
  // cluster 0: rows 0 (a0,b0) and 3 (a1,b1); cluster 1: rows 1 (a0,b1), 2 (a1,b0)
  expected << 1, 1, 1, 1,
              1, 1, 1, 1;
  EXPECT_EQ(f.counts, expected);
  EXPECT_EQ(f.grand_total, 8);

  const Labels uneven = {0, 0, 0, 1};
  CountMatrix expected2(2, 4);
  expected2 << 2, 1, 2, 1,
               0, 1, 0, 1;
  EXPECT_EQ(Contingency(z, uneven, 2).counts, expected2);
  EXPECT_THROW(Contingency(z, Labels{0, 0, 2, 0}, 2), ConfigError);
}

TEST(ContingencyTest, OneClusterAndMarginInvariants) {
  const auto ds = RandomDataset(70, 4, 3, 5);
  const auto z = Indicator(ds, ds.schema.VariableNames());
  const auto one = Contingency(z, Labels(70, 0), 1);
  EXPECT_EQ(one.counts.row(0).cast<double>(), z.z.colwise().sum());
  std::mt19937 rng(9);
  Labels assign(70);
  for (auto& a : assign) a = static_cast<int>(rng() % 3);
  const auto f = Contingency(z, assign, 3);
  EXPECT_EQ(f.grand_total, 70 * 4);
  EXPECT_EQ(f.counts.colwise().sum().cast<double>(), z.z.colwise().sum());
  for (int k = 0; k < 3; ++k) {
    const auto size = std::count(assign.begin(), assign.end(), k);
    EXPECT_EQ(f.counts.row(k).sum(), 4 * size);
  }
}

TEST(SchemaTest, JsonRoundTripAndValidation) {
  Schema s = WeatherLight();
  s.target = "Light";
  EXPECT_TRUE(SchemaFromJson(SchemaToJson(s)) == s);
  Schema dup = WeatherLight();
  dup.variables[1].name = "Weather";
  EXPECT_THROW(dup.Validate(), DataError);
  Schema single = WeatherLight();
  single.variables[0].categories = {"Clear"};
  EXPECT_THROW(single.Validate(), DataError);
}

}  // namespace
}  // namespace ccashap
