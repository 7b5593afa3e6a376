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

#ifndef POPSYNTH_TABLE_HPP_
#define POPSYNTH_TABLE_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "popsynth/schema.hpp"

namespace popsynth {

// A household and its persons as category indices, before windowing.
struct HouseholdRecord {
  std::string id;
  std::vector<int> household;             // one entry per household variable
  std::vector<std::vector<int>> persons;  // one entry per person variable each
};

struct Microdata {
  std::vector<HouseholdRecord> households;
  std::vector<std::string> warnings;
};

// Joins the household and person tables on `household_id`. Extra columns
// (e.g. person_id) are ignored.
Microdata load_microdata(const std::filesystem::path& household_path,
                         const std::filesystem::path& person_path,
                         const Schema& schema);

// One fixed-window row: household values followed by n_window person slots.
// Absent slots hold the NA index for every person variable and always come
// after the present ones.
struct HouseholdRow {
  std::string id;
  std::vector<int> household;
  std::vector<std::vector<int>> slots;

  int size(const Schema& schema) const;
};

struct RestructuredTable {
  std::shared_ptr<const Schema> schema;
  int n_window = 1;
  std::vector<HouseholdRow> rows;

  Layout layout() const { return Layout(schema, n_window); }
  std::size_t person_count() const;
};

// Windows every household. `n_window` overrides the schema's pinned window;
// when neither is set the observed maximum household size is used.
RestructuredTable restructure(const std::vector<HouseholdRecord>& records,
                              std::shared_ptr<const Schema> schema,
                              std::optional<int> n_window = std::nullopt);

// Inverse of restructure up to person order.
std::vector<HouseholdRecord> flatten(const RestructuredTable& table);

// Sorts persons by the schema's composite key (stable).
void sort_persons(std::vector<std::vector<int>>& persons, const Schema& schema);

// One row per household: household_id, household vars, then slot-prefixed
// person vars (e.g. p1_AGEP).
void write_restructured(const RestructuredTable& table,
                        const std::filesystem::path& path);

// Writes the table as household and person tables loadable by
// load_microdata. Person ids are `<household_id>-<k>`.
void write_household_tables(const RestructuredTable& table,
                            const std::filesystem::path& household_path,
                            const std::filesystem::path& person_path);

}  // namespace popsynth

#endif  // POPSYNTH_TABLE_HPP_
