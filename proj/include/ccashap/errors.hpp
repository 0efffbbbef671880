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

#ifndef CCASHAP_ERRORS_HPP_
#define CCASHAP_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccashap {

// Invalid configuration or parameters (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (CLI exit code 3). Row and column are
// 1-based positions in the source file when known, 0 otherwise.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t row = 0,
                     std::size_t column = 0)
      : std::runtime_error(what), row_(row), column_(column) {}

  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

// Degenerate numerical state, e.g. rescaling with all centroids at the
// origin (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ccashap

#endif  // CCASHAP_ERRORS_HPP_
