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

// Twenty hand-written ACS-schema households. Two of them contradict the
// R65/R18 rules: H07 is flagged R65=Yes with members aged 40-49, and H15 says
// R18=No while housing a 10-14 year old.

#ifndef POPSYNTH_TESTS_SANITY_FIXTURE_HPP_
#define POPSYNTH_TESTS_SANITY_FIXTURE_HPP_

#include <memory>
#include <string>
#include <vector>

#include "popsynth/schema.hpp"
#include "popsynth/table.hpp"

namespace popsynth::fixture {

struct Person {
  std::string age, sex, schl;
};

struct Household {
  std::string id, r18, r65;
  std::vector<Person> persons;
};

inline const std::vector<std::string>& planted_violations() {
  static const std::vector<std::string> ids{"H07", "H15"};
  return ids;
}

inline RestructuredTable sanity_fixture(std::shared_ptr<const Schema> schema) {
  const std::string hs = "High school graduate (or equivalency)";
  const std::string ba = "Bachelor's degree";
  const std::string na = "Not applicable";
  const std::vector<Household> rows{
      {"H01", "No", "No", {{"35-39", "Male", ba}, {"30-34", "Female", ba}}},
      {"H02", "Yes", "No", {{"40-44", "Female", hs}, {"10-14", "Male", na}}},
      {"H03", "No", "Yes", {{"70-74", "Male", hs}}},
      {"H04", "No", "Yes", {{"65-69", "Female", ba}, {"60-64", "Male", ba}}},
      {"H05", "Yes", "No", {{"30-34", "Male", hs}, {"Under 5", "Female", na}, {"5-9", "Male", na}}},
      {"H06", "No", "No", {{"25-29", "Female", ba}}},
      {"H07", "No", "Yes", {{"45-49", "Male", hs}, {"40-44", "Female", hs}}},
      {"H08", "Yes", "Yes", {{"85 and over", "Female", hs}, {"15-19", "Male", hs}}},
      {"H09", "No", "No", {{"55-59", "Male", ba}}},
      {"H10", "Yes", "No", {{"35-39", "Female", ba}, {"15-19", "Female", hs}}},
      {"H11", "No", "No", {{"20-24", "Male", hs}, {"20-24", "Male", hs}, {"20-24", "Female", hs}}},
      {"H12", "No", "Yes", {{"80-84", "Male", hs}}},
      {"H13", "Yes", "No", {{"50-54", "Male", ba}, {"45-49", "Female", ba}, {"10-14", "Female", na}}},
      {"H14", "No", "No", {{"60-64", "Female", hs}}},
      {"H15", "No", "No", {{"35-39", "Male", hs}, {"10-14", "Male", na}}},
      {"H16", "No", "Yes", {{"75-79", "Female", ba}, {"50-54", "Male", ba}}},
      {"H17", "No", "No", {{"40-44", "Female", hs}}},
      {"H18", "Yes", "No", {{"25-29", "Female", hs}, {"Under 5", "Male", na}}},
      {"H19", "No", "No", {{"30-34", "Male", ba}, {"35-39", "Male", ba}}},
      {"H20", "No", "Yes", {{"65-69", "Male", hs}, {"65-69", "Female", hs}}},
  };
  const Schema& s = *schema;
  std::vector<HouseholdRecord> records;
  for (const auto& h : rows) {
    HouseholdRecord r;
    r.id = h.id;
    auto hv = [&](const char* var, const std::string& label) {
      return s.household_vars[s.household_index(var)].index_of(label);
    };
    r.household.assign(s.household_vars.size(), 0);
    r.household[s.household_index("TEN")] = hv("TEN", "Owned");
    r.household[s.household_index("HINCP")] = hv("HINCP", "$50,000 to $74,999");
    r.household[s.household_index("R18")] = hv("R18", h.r18);
    r.household[s.household_index("R65")] = hv("R65", h.r65);
    r.household[s.household_index("HHL")] = hv("HHL", "English only");
    r.household[s.household_index("VEH")] = hv("VEH", "1 vehicle");
    for (const auto& p : h.persons) {
      std::vector<int> v(s.person_vars.size());
      v[s.person_index("AGEP")] = s.person_vars[s.person_index("AGEP")].index_of(p.age);
      v[s.person_index("SEX")] = s.person_vars[s.person_index("SEX")].index_of(p.sex);
      v[s.person_index("SCHL")] = s.person_vars[s.person_index("SCHL")].index_of(p.schl);
      r.persons.push_back(std::move(v));
    }
    sort_persons(r.persons, s);
    records.push_back(std::move(r));
  }
  return restructure(records, std::move(schema), 3);
}

}  // namespace popsynth::fixture

#endif  // POPSYNTH_TESTS_SANITY_FIXTURE_HPP_
