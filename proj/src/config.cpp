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

#include "ccashap/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

#include "ccashap/errors.hpp"

namespace ccashap {
namespace {

using Value = std::variant<std::string, bool, std::int64_t, double, std::vector<std::int64_t>>;

struct Entry {
  Value value;
  int line = 0;
};

[[noreturn]] void Fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

std::string_view Trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Drops a trailing comment, ignoring '#' inside quotes.
std::string_view StripComment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && quoted) {
      ++i;
    } else if (s[i] == '"') {
      quoted = !quoted;
    } else if (s[i] == '#' && !quoted) {
      return s.substr(0, i);
    }
  }
  return s;
}

bool ValidKey(std::string_view key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      return false;
    }
  }
  return true;
}

std::optional<std::int64_t> ParseInteger(std::string_view s) {
  std::int64_t v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<double> ParseFloat(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

Value ParseValue(std::string_view raw, int line) {
  if (raw.empty()) Fail(line, "missing value");
  if (raw.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < raw.size() && raw[i] != '"'; ++i) {
      if (raw[i] == '\\') {
        if (++i == raw.size()) break;
        switch (raw[i]) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 't': out += '\t'; break;
          case 'n': out += '\n'; break;
          default: Fail(line, std::string("unknown escape \\") + raw[i]);
        }
      } else {
        out += raw[i];
      }
    }
    if (i >= raw.size()) Fail(line, "unterminated string");
    if (i + 1 != raw.size()) Fail(line, "text after closing quote");
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '[') {
    if (raw.back() != ']') Fail(line, "unterminated array");
    std::vector<std::int64_t> items;
    std::string_view body = Trim(raw.substr(1, raw.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const auto item = Trim(body.substr(0, comma));
      const auto v = ParseInteger(item);
      if (!v) Fail(line, "array items must be integers");
      items.push_back(*v);
      if (comma == std::string_view::npos) break;
      body = Trim(body.substr(comma + 1));
      if (body.empty()) Fail(line, "trailing comma in array");
    }
    return items;
  }
  if (auto v = ParseInteger(raw)) return *v;
  if (auto v = ParseFloat(raw)) return *v;
  Fail(line, "cannot read value '" + std::string(raw) + "' (strings need quotes)");
}

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  std::optional<std::string> String(const std::string& key) {
    const Entry* e = Take(key);
    if (!e) return std::nullopt;
    if (auto* s = std::get_if<std::string>(&e->value)) return *s;
    Fail(e->line, "'" + key + "' must be a quoted string");
  }

  std::optional<bool> Bool(const std::string& key) {
    const Entry* e = Take(key);
    if (!e) return std::nullopt;
    if (auto* b = std::get_if<bool>(&e->value)) return *b;
    Fail(e->line, "'" + key + "' must be true or false");
  }

  std::optional<std::int64_t> Integer(const std::string& key) {
    const Entry* e = Take(key);
    if (!e) return std::nullopt;
    if (auto* i = std::get_if<std::int64_t>(&e->value)) return *i;
    Fail(e->line, "'" + key + "' must be an integer");
  }

  std::optional<double> Number(const std::string& key) {
    const Entry* e = Take(key);
    if (!e) return std::nullopt;
    if (auto* d = std::get_if<double>(&e->value)) return *d;
    if (auto* i = std::get_if<std::int64_t>(&e->value)) return static_cast<double>(*i);
    Fail(e->line, "'" + key + "' must be a number");
  }

  std::optional<std::vector<std::int64_t>> Array(const std::string& key) {
    const Entry* e = Take(key);
    if (!e) return std::nullopt;
    if (auto* a = std::get_if<std::vector<std::int64_t>>(&e->value)) return *a;
    Fail(e->line, "'" + key + "' must be an integer array");
  }

  int LineOf(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  void RejectLeftovers() const {
    for (const auto& [key, entry] : entries_) {
      if (!used_.count(key)) Fail(entry.line, "unknown key '" + key + "'");
    }
  }

 private:
  const Entry* Take(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

int ToInt(std::int64_t v, Reader& r, const std::string& key) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    Fail(r.LineOf(key), "'" + key + "' is out of range");
  }
  return static_cast<int>(v);
}

template <typename Enum>
Enum Choice(const std::string& value, const std::vector<std::pair<std::string, Enum>>& options,
            Reader& r, const std::string& key) {
  std::string names;
  for (const auto& [name, e] : options) {
    if (name == value) return e;
    names += (names.empty() ? "" : ", ") + name;
  }
  Fail(r.LineOf(key), "'" + key + "' must be one of " + names);
}

const std::vector<std::pair<std::string, SchemaMode>> kSchemaModes = {
    {"infer", SchemaMode::kInfer}, {"declared", SchemaMode::kDeclared}};
const std::vector<std::pair<std::string, ConsensusRule>> kConsensus = {
    {"averaged", ConsensusRule::kAveraged}, {"per-fold-majority", ConsensusRule::kPerFoldMajority}};
const std::vector<std::pair<std::string, ClassMode>> kClassModes = {
    {"predicted-class", ClassMode::kPredictedClass}, {"per-class", ClassMode::kPerClass}};
const std::vector<std::pair<std::string, EnsembleKind>> kModels = {
    {"gradient-boosting", EnsembleKind::kGradientBoosting},
    {"random-forest", EnsembleKind::kRandomForest}};
const std::vector<std::pair<std::string, ShapAlgorithm>> kAlgorithms = {
    {"tree-paths", ShapAlgorithm::kTreePaths}, {"coalitions", ShapAlgorithm::kCoalitions}};

template <typename Enum>
std::string NameOf(Enum value, const std::vector<std::pair<std::string, Enum>>& options) {
  for (const auto& [name, e] : options) {
    if (e == value) return name;
  }
  return "";
}

}  // namespace

PipelineConfig ParseConfig(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = Trim(StripComment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') Fail(line_no, "malformed section header");
      const auto name = Trim(line.substr(1, line.size() - 2));
      if (!ValidKey(name)) Fail(line_no, "bad section name");
      section = std::string(name) + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) Fail(line_no, "expected key = value");
    const auto key = Trim(line.substr(0, eq));
    if (!ValidKey(key)) Fail(line_no, "bad key '" + std::string(key) + "'");
    const std::string full = section + std::string(key);
    if (entries.count(full)) {
      Fail(line_no, "'" + full + "' repeats line " + std::to_string(entries[full].line));
    }
    entries[full] = {ParseValue(Trim(line.substr(eq + 1)), line_no), line_no};
  }

  Reader r(std::move(entries));
  PipelineConfig c;
  if (auto v = r.String("input")) c.input = *v;
  if (auto v = r.String("schema_mode")) c.schema_mode = Choice(*v, kSchemaModes, r, "schema_mode");
  if (auto v = r.String("schema")) c.schema = *v;
  if (auto v = r.String("target")) c.target = *v;
  if (auto v = r.Number("skew_threshold")) c.skew_threshold = *v;
  if (auto v = r.Integer("seed")) {
    if (*v < 0) Fail(r.LineOf("seed"), "seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = r.String("output")) c.output = *v;
  if (auto v = r.Integer("threads")) c.threads = ToInt(*v, r, "threads");

  if (auto v = r.Bool("screening.enabled")) c.screening = *v;
  if (auto v = r.Integer("screening.folds")) c.folds = ToInt(*v, r, "screening.folds");
  if (auto v = r.String("screening.consensus")) {
    c.consensus = Choice(*v, kConsensus, r, "screening.consensus");
  }

  if (auto v = r.Integer("rf.n_trees")) c.rf.n_trees = ToInt(*v, r, "rf.n_trees");
  if (auto v = r.Integer("rf.max_depth")) c.rf.max_depth = ToInt(*v, r, "rf.max_depth");
  if (auto v = r.Integer("rf.min_leaf")) c.rf.min_leaf = ToInt(*v, r, "rf.min_leaf");
  if (auto v = r.Integer("rf.feature_subsample")) {
    c.rf.feature_subsample = ToInt(*v, r, "rf.feature_subsample");
  }
  if (auto v = r.Integer("gb.n_rounds")) c.gb.n_rounds = ToInt(*v, r, "gb.n_rounds");
  if (auto v = r.Integer("gb.max_depth")) c.gb.max_depth = ToInt(*v, r, "gb.max_depth");
  if (auto v = r.Number("gb.learning_rate")) c.gb.learning_rate = *v;
  if (auto v = r.Integer("gb.min_leaf")) c.gb.min_leaf = ToInt(*v, r, "gb.min_leaf");
  if (auto v = r.Number("gb.l2")) c.gb.l2 = *v;

  if (auto v = r.Integer("cca.k")) c.k = ToInt(*v, r, "cca.k");
  if (auto v = r.Array("cca.k_range")) {
    if (v->size() != 2) Fail(r.LineOf("cca.k_range"), "'cca.k_range' needs [first, last]");
    c.k_range = std::pair{ToInt((*v)[0], r, "cca.k_range"), ToInt((*v)[1], r, "cca.k_range")};
  }
  if (auto v = r.Integer("cca.restarts")) c.restarts = ToInt(*v, r, "cca.restarts");
  if (auto v = r.Number("cca.tol")) c.tol = *v;
  if (auto v = r.Integer("cca.max_iter")) c.max_iter = ToInt(*v, r, "cca.max_iter");
  if (auto v = r.Integer("cca.dims")) c.dims = ToInt(*v, r, "cca.dims");
  if (auto v = r.Bool("cca.include_severity")) c.include_severity = *v;

  if (auto v = r.Integer("shap.background_size")) {
    if (*v < 1) Fail(r.LineOf("shap.background_size"), "background size must be positive");
    c.background_size = static_cast<Index>(*v);
  }
  if (auto v = r.String("shap.class_mode")) {
    c.class_mode = Choice(*v, kClassModes, r, "shap.class_mode");
  }
  if (auto v = r.Bool("shap.per_cluster")) c.per_cluster = *v;
  if (auto v = r.String("shap.model")) c.model = Choice(*v, kModels, r, "shap.model");
  if (auto v = r.String("shap.algorithm")) {
    c.algorithm = Choice(*v, kAlgorithms, r, "shap.algorithm");
  }
  r.RejectLeftovers();
  return c;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto config = ParseConfig(buffer.str());
  ResolvePaths(config, path.parent_path());
  return config;
}

void ResolvePaths(PipelineConfig& config, const std::filesystem::path& base) {
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative() && !base.empty()) {
      p = (base / p).lexically_normal().string();
    }
  };
  resolve(config.input);
  resolve(config.schema);
  resolve(config.output);
}

void ValidateConfig(const PipelineConfig& c) {
  if (!c.seed) throw ConfigError("'seed' is mandatory");
  if (c.k.has_value() == c.k_range.has_value()) {
    throw ConfigError("set exactly one of 'cca.k' and 'cca.k_range'");
  }
  if (c.k && *c.k < 1) throw ConfigError("'cca.k' must be at least 1");
  if (c.k_range && (c.k_range->first < 1 || c.k_range->second < c.k_range->first)) {
    throw ConfigError("'cca.k_range' must be [first, last] with 1 <= first <= last");
  }
  if (c.input.empty()) throw ConfigError("'input' is mandatory");
  if (c.schema_mode == SchemaMode::kDeclared && c.schema.empty()) {
    throw ConfigError("declared schema mode needs 'schema'");
  }
  if (!(c.skew_threshold > 0.0 && c.skew_threshold < 1.0)) {
    throw ConfigError("'skew_threshold' must lie strictly between 0 and 1");
  }
  if (c.folds < 2) throw ConfigError("'screening.folds' must be at least 2");
  if (c.restarts < 1) throw ConfigError("'cca.restarts' must be at least 1");
  if (c.max_iter < 1) throw ConfigError("'cca.max_iter' must be at least 1");
  if (c.dims < 0) throw ConfigError("'cca.dims' must be non-negative");
  if (!(c.tol >= 0.0)) throw ConfigError("'cca.tol' must be non-negative");
  if (c.threads < 1) throw ConfigError("'threads' must be at least 1");
  if (c.rf.n_trees < 1 || c.rf.max_depth < 0 || c.rf.min_leaf < 1 || c.rf.feature_subsample < 0) {
    throw ConfigError("invalid random forest parameters");
  }
  if (c.gb.n_rounds < 0 || c.gb.max_depth < 0 || c.gb.min_leaf < 1 ||
      !(c.gb.learning_rate >= 0.0) || !(c.gb.l2 >= 0.0)) {
    throw ConfigError("invalid gradient boosting parameters");
  }
  if (c.include_severity && !c.target) {
    throw ConfigError("'cca.include_severity' needs a target");
  }
}

nlohmann::json ConfigToJson(const PipelineConfig& c) {
  nlohmann::json j;
  j["input"] = c.input;
  j["schema_mode"] = NameOf(c.schema_mode, kSchemaModes);
  j["schema"] = c.schema;
  j["target"] = c.target ? nlohmann::json(*c.target) : nlohmann::json(nullptr);
  j["skew_threshold"] = c.skew_threshold;
  j["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
  j["screening"] = {{"enabled", c.screening},
                    {"folds", c.folds},
                    {"consensus", NameOf(c.consensus, kConsensus)}};
  j["rf"] = {{"n_trees", c.rf.n_trees},
             {"max_depth", c.rf.max_depth},
             {"min_leaf", c.rf.min_leaf},
             {"feature_subsample", c.rf.feature_subsample}};
  j["gb"] = {{"n_rounds", c.gb.n_rounds},
             {"max_depth", c.gb.max_depth},
             {"learning_rate", c.gb.learning_rate},
             {"min_leaf", c.gb.min_leaf},
             {"l2", c.gb.l2}};
  nlohmann::json cca = {{"restarts", c.restarts},
                        {"tol", c.tol},
                        {"max_iter", c.max_iter},
                        {"dims", c.dims},
                        {"include_severity", c.include_severity}};
  if (c.k) cca["k"] = *c.k;
  if (c.k_range) cca["k_range"] = {c.k_range->first, c.k_range->second};
  j["cca"] = cca;
  j["shap"] = {{"background_size", c.background_size},
               {"class_mode", NameOf(c.class_mode, kClassModes)},
               {"per_cluster", c.per_cluster},
               {"model", NameOf(c.model, kModels)},
               {"algorithm", NameOf(c.algorithm, kAlgorithms)}};
  return j;
}

}  // namespace ccashap
