// Copyright 2026 The popsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef POPSYNTH_CSV_HPP_
#define POPSYNTH_CSV_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace popsynth::csv {

// A parsed delimited table. Fields follow RFC 4180 quoting so category
// labels such as "$5,000 to $9,999" survive a round trip.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  int column(const std::string& name) const;
  // Like column() but throws ValidationError naming the missing column.
  int require_column(const std::string& name, const std::string& source) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source);

std::string quote(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace popsynth::csv

#endif  // POPSYNTH_CSV_HPP_
