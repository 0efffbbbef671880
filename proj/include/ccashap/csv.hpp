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

#ifndef CCASHAP_CSV_HPP_
#define CCASHAP_CSV_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace ccashap::csv {

using Record = std::vector<std::string>;

// Splits RFC-4180 text into records. Quoted fields may contain separators,
// doubled quotes and line breaks. Both LF and CRLF line endings are accepted.
// A trailing line break does not produce an empty record. Throws DataError on
// an unterminated quote or stray quote inside an unquoted field.
std::vector<Record> Parse(std::string_view text);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string EscapeField(std::string_view field);

std::string FormatRecord(const Record& record);

}  // namespace ccashap::csv

#endif  // CCASHAP_CSV_HPP_
