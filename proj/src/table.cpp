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

#include "popsynth/table.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "popsynth/common.hpp"
#include "popsynth/csv.hpp"

namespace popsynth {

int HouseholdRow::size(const Schema& schema) const {
  const int anchor = schema.anchor_index();
  const int na = schema.na_index(anchor);
  int n = 0;
  for (const auto& slot : slots) {
    if (slot[anchor] != na) ++n;
  }
  return n;
}

std::size_t RestructuredTable::person_count() const {
  std::size_t n = 0;
  for (const auto& row : rows) n += static_cast<std::size_t>(row.size(*schema));
  return n;
}

Microdata load_microdata(const std::filesystem::path& household_path,
                         const std::filesystem::path& person_path,
                         const Schema& schema) {
  const auto hh = csv::read(household_path);
  const auto pp = csv::read(person_path);
  const std::string hsrc = household_path.string();
  const std::string psrc = person_path.string();

  Microdata out;
  std::unordered_map<std::string, std::size_t> by_id;
  const int hid = hh.require_column("household_id", hsrc);
  std::vector<int> hcols;
  for (const auto& v : schema.household_vars) hcols.push_back(hh.require_column(v.name, hsrc));
  out.households.reserve(hh.rows.size());
  for (const auto& row : hh.rows) {
    HouseholdRecord rec;
    rec.id = row[hid];
    for (std::size_t v = 0; v < hcols.size(); ++v) {
      const auto& label = row[hcols[v]];
      const int idx = schema.household_vars[v].index_of(label);
      if (idx < 0) {
        throw ValidationError(hsrc + ": household " + rec.id +
                              ": unknown category '" + label + "' for " +
                              schema.household_vars[v].name);
      }
      rec.household.push_back(idx);
    }
    if (!by_id.emplace(rec.id, out.households.size()).second) {
      throw ValidationError(hsrc + ": duplicate household id " + rec.id);
    }
    out.households.push_back(std::move(rec));
  }

  const int pid = pp.require_column("household_id", psrc);
  std::vector<int> pcols;
  for (const auto& v : schema.person_vars) pcols.push_back(pp.require_column(v.name, psrc));
  for (const auto& row : pp.rows) {
    const auto it = by_id.find(row[pid]);
    if (it == by_id.end()) {
      throw ValidationError(psrc + ": orphan person references absent household " +
                            row[pid]);
    }
    std::vector<int> person;
    for (std::size_t v = 0; v < pcols.size(); ++v) {
      const auto& var = schema.person_vars[v];
      const auto& label = row[pcols[v]];
      const int idx = var.index_of(label);
      if (idx < 0 || idx == var.size() - 1) {
        throw ValidationError(psrc + ": household " + row[pid] +
                              ": unknown category '" + label + "' for " + var.name);
      }
      person.push_back(idx);
    }
    out.households[it->second].persons.push_back(std::move(person));
  }
  if (pp.rows.empty()) {
    out.warnings.push_back(psrc + ": person table is empty; every household has zero persons");
  }
  return out;
}

void sort_persons(std::vector<std::vector<int>>& persons, const Schema& schema) {
  std::vector<std::pair<int, bool>> keys;
  for (const auto& k : schema.sort_keys) keys.emplace_back(schema.person_index(k.variable), k.descending);
  std::stable_sort(persons.begin(), persons.end(),
                   [&](const std::vector<int>& a, const std::vector<int>& b) {
                     for (const auto& [var, desc] : keys) {
                       if (a[var] != b[var]) return desc ? a[var] > b[var] : a[var] < b[var];
                     }
                     return false;
                   });
}

RestructuredTable restructure(const std::vector<HouseholdRecord>& records,
                              std::shared_ptr<const Schema> schema,
                              std::optional<int> n_window) {
  RestructuredTable table;
  table.schema = schema;
  std::size_t observed = 1;
  for (const auto& rec : records) observed = std::max(observed, rec.persons.size());
  const std::optional<int> pinned = n_window ? n_window : schema->n_window;
  table.n_window = pinned ? *pinned : static_cast<int>(observed);
  if (table.n_window < 1) throw ValidationError("restructure: n_window must be >= 1");

  std::vector<int> na_slot;
  for (std::size_t v = 0; v < schema->person_vars.size(); ++v) {
    na_slot.push_back(schema->na_index(static_cast<int>(v)));
  }
  table.rows.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.persons.size() > static_cast<std::size_t>(table.n_window)) {
      throw ValidationError("restructure: household " + rec.id + " has " +
                            std::to_string(rec.persons.size()) +
                            " persons, exceeding n_window " +
                            std::to_string(table.n_window));
    }
    HouseholdRow row;
    row.id = rec.id;
    row.household = rec.household;
    row.slots = rec.persons;
    sort_persons(row.slots, *schema);
    row.slots.resize(static_cast<std::size_t>(table.n_window), na_slot);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<HouseholdRecord> flatten(const RestructuredTable& table) {
  const int anchor = table.schema->anchor_index();
  const int na = table.schema->na_index(anchor);
  std::vector<HouseholdRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    HouseholdRecord rec{row.id, row.household, {}};
    for (const auto& slot : row.slots) {
      if (slot[anchor] != na) rec.persons.push_back(slot);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_restructured(const RestructuredTable& table,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  const Schema& s = *table.schema;
  std::vector<std::string> header{"household_id"};
  for (const auto& v : s.household_vars) header.push_back(v.name);
  for (int k = 0; k < table.n_window; ++k) {
    for (const auto& v : s.person_vars) header.push_back("p" + std::to_string(k + 1) + "_" + v.name);
  }
  csv::write_row(out, header);
  std::vector<std::string> fields;
  for (const auto& row : table.rows) {
    fields.assign(1, row.id);
    for (std::size_t v = 0; v < row.household.size(); ++v) {
      fields.push_back(s.household_vars[v].categories[row.household[v]]);
    }
    for (const auto& slot : row.slots) {
      for (std::size_t v = 0; v < slot.size(); ++v) {
        fields.push_back(s.person_vars[v].categories[slot[v]]);
      }
    }
    csv::write_row(out, fields);
  }
}

void write_household_tables(const RestructuredTable& table,
                            const std::filesystem::path& household_path,
                            const std::filesystem::path& person_path) {
  std::ofstream hh(household_path, std::ios::binary);
  std::ofstream pp(person_path, std::ios::binary);
  if (!hh || !pp) throw RuntimeError("cannot write household/person tables");
  const Schema& s = *table.schema;
  std::vector<std::string> header{"household_id"};
  for (const auto& v : s.household_vars) header.push_back(v.name);
  csv::write_row(hh, header);
  header = {"person_id", "household_id"};
  for (const auto& v : s.person_vars) header.push_back(v.name);
  csv::write_row(pp, header);

  const int anchor = s.anchor_index();
  const int na = s.na_index(anchor);
  std::vector<std::string> fields;
  for (const auto& row : table.rows) {
    fields.assign(1, row.id);
    for (std::size_t v = 0; v < row.household.size(); ++v) {
      fields.push_back(s.household_vars[v].categories[row.household[v]]);
    }
    csv::write_row(hh, fields);
    int k = 0;
    for (const auto& slot : row.slots) {
      if (slot[anchor] == na) continue;
      fields = {row.id + "-" + std::to_string(++k), row.id};
      for (std::size_t v = 0; v < slot.size(); ++v) {
        fields.push_back(s.person_vars[v].categories[slot[v]]);
      }
      csv::write_row(pp, fields);
    }
  }
}

}  // namespace popsynth
