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

#include "popsynth/generation.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "popsynth/common.hpp"
#include "popsynth/csv.hpp"

namespace popsynth {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) parts.push_back(trim(part));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

template <typename Scalar>
SyntheticInventory generate_inventory(VaeModel<Scalar>& model, const train::LatentMatrix<Scalar>& latent,
                                      const Layout& layout, DecodeMode mode, std::uint64_t seed,
                                      std::string tract_id) {
  if (layout.fingerprint() != model.fingerprint()) {
    throw ValidationError("generate: schema fingerprint mismatch between model and layout");
  }
  if (latent.values.cols() != model.latent_dim()) {
    throw ValidationError("generate: latent width does not match the decoder input");
  }
  model.set_mode(nn::Mode::kEval);
  EncodedMatrix probs{layout, model.decode(latent.values).template cast<double>()};
  DecodeResult decoded = decode_onehot(probs, mode, seed);

  SyntheticInventory inv;
  inv.provenance.model_fingerprint = model.fingerprint();
  inv.provenance.model_checksum = model.checksum();
  inv.provenance.latent_seed = latent.seed;
  inv.provenance.decode_seed = seed;
  inv.provenance.mode = mode;
  inv.provenance.tract_id = std::move(tract_id);
  inv.provenance.requested_households = static_cast<std::size_t>(latent.values.rows());
  inv.provenance.slot_disagreements = decoded.disagreements;
  inv.table.schema = decoded.table.schema;
  inv.table.n_window = decoded.table.n_window;
  const Schema& schema = *inv.table.schema;
  std::size_t next_id = 1;
  for (auto& row : decoded.table.rows) {
    if (row.size(schema) == 0) {
      ++inv.provenance.dropped_empty_households;
      continue;
    }
    row.id = std::to_string(next_id++);
    inv.table.rows.push_back(std::move(row));
  }
  return inv;
}

template SyntheticInventory generate_inventory<double>(VaeModel<double>&, const train::LatentMatrix<double>&,
                                                       const Layout&, DecodeMode, std::uint64_t, std::string);
template SyntheticInventory generate_inventory<float>(VaeModel<float>&, const train::LatentMatrix<float>&,
                                                      const Layout&, DecodeMode, std::uint64_t, std::string);

void write_inventory(const SyntheticInventory& inventory, const std::filesystem::path& household_path,
                     const std::filesystem::path& person_path,
                     const std::filesystem::path& provenance_path) {
  const RestructuredTable& table = inventory.table;
  const Schema& s = *table.schema;
  std::ofstream hh(household_path, std::ios::binary);
  std::ofstream pp(person_path, std::ios::binary);
  if (!hh || !pp) throw RuntimeError("cannot write inventory tables");
  std::vector<std::string> header{"household_id"};
  for (const auto& v : s.household_vars) header.push_back(v.name);
  csv::write_row(hh, header);
  header = {"person_id", "household_id"};
  for (const auto& v : s.person_vars) header.push_back(v.name);
  csv::write_row(pp, header);

  const int anchor = s.anchor_index();
  const int na = s.na_index(anchor);
  std::size_t person_id = 1;
  std::vector<std::string> fields;
  for (const auto& row : table.rows) {
    fields.assign(1, row.id);
    for (std::size_t v = 0; v < row.household.size(); ++v) {
      fields.push_back(s.household_vars[v].categories[row.household[v]]);
    }
    csv::write_row(hh, fields);
    for (const auto& slot : row.slots) {
      if (slot[anchor] == na) continue;
      fields = {std::to_string(person_id++), row.id};
      for (std::size_t v = 0; v < slot.size(); ++v) fields.push_back(s.person_vars[v].categories[slot[v]]);
      csv::write_row(pp, fields);
    }
  }

  const auto& p = inventory.provenance;
  nlohmann::ordered_json j;
  j["model_fingerprint"] = to_hex(p.model_fingerprint);
  j["model_checksum"] = to_hex(p.model_checksum);
  j["latent_seed"] = p.latent_seed;
  j["decode_seed"] = p.decode_seed;
  j["decode_mode"] = p.mode == DecodeMode::kArgmax ? "argmax" : "sample";
  j["tract_id"] = p.tract_id;
  j["requested_households"] = p.requested_households;
  j["emitted_households"] = table.rows.size();
  j["emitted_persons"] = table.person_count();
  j["dropped_empty_households"] = p.dropped_empty_households;
  j["slot_disagreements"] = p.slot_disagreements;
  std::ofstream prov(provenance_path, std::ios::binary);
  if (!prov) throw RuntimeError("cannot write " + provenance_path.string());
  prov << j.dump(2) << '\n';
}

std::vector<SanityRule> default_sanity_rules() {
  return {
      {"R65", "R65", "Yes", "AGEP", {"65-69", "70-74", "75-79", "80-84", "85 and over"}},
      {"R18", "R18", "Yes", "AGEP", {"Under 5", "5-9", "10-14", "15-19"}},
  };
}

std::vector<SanityRule> load_sanity_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open rules file " + path.string());
  std::vector<SanityRule> rules;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto fields = split(line, '|');
    if (fields.size() != 5) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 5 '|'-separated fields");
    }
    SanityRule rule{fields[0], fields[1], fields[2], fields[3], {}};
    for (auto& c : split(fields[4], ';')) {
      if (!c.empty()) rule.member_categories.push_back(std::move(c));
    }
    if (rule.member_categories.empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": empty category list");
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

void write_sanity_rules(const std::vector<SanityRule>& rules, std::ostream& out) {
  out << "# id | household variable | flag value | person variable | member categories\n";
  for (const auto& r : rules) {
    out << r.id << " | " << r.household_var << " | " << r.flag_value << " | " << r.person_var << " | ";
    for (std::size_t i = 0; i < r.member_categories.size(); ++i) {
      if (i) out << "; ";
      out << r.member_categories[i];
    }
    out << '\n';
  }
}

void validate_rule(const SanityRule& rule, const Schema& schema) {
  const int h = schema.household_index(rule.household_var);
  if (h < 0) throw ValidationError("rule " + rule.id + ": unknown household variable " + rule.household_var);
  if (schema.household_vars[h].index_of(rule.flag_value) < 0) {
    throw ValidationError("rule " + rule.id + ": unknown category " + rule.flag_value + " for " +
                          rule.household_var);
  }
  const int p = schema.person_index(rule.person_var);
  if (p < 0) throw ValidationError("rule " + rule.id + ": unknown person variable " + rule.person_var);
  for (const auto& c : rule.member_categories) {
    if (schema.person_vars[p].index_of(c) < 0) {
      throw ValidationError("rule " + rule.id + ": unknown category " + c + " for " + rule.person_var);
    }
  }
}

SanityReport sanity_check(const RestructuredTable& table, const std::vector<SanityRule>& rules) {
  const Schema& schema = *table.schema;
  SanityReport report;
  report.households = table.rows.size();
  struct Resolved {
    int household_var;
    int flag;
    int person_var;
    std::set<int> members;
  };
  std::vector<Resolved> resolved;
  for (const auto& rule : rules) {
    validate_rule(rule, schema);
    Resolved r{schema.household_index(rule.household_var), 0, schema.person_index(rule.person_var), {}};
    r.flag = schema.household_vars[r.household_var].index_of(rule.flag_value);
    for (const auto& c : rule.member_categories) r.members.insert(schema.person_vars[r.person_var].index_of(c));
    resolved.push_back(std::move(r));
    report.rule_ids.push_back(rule.id);
  }
  report.counts.assign(rules.size(), 0);
  const int anchor = schema.anchor_index();
  const int na = schema.na_index(anchor);
  for (const auto& row : table.rows) {
    bool any = false;
    for (std::size_t k = 0; k < resolved.size(); ++k) {
      const auto& r = resolved[k];
      const bool flagged = row.household[r.household_var] == r.flag;
      bool member = false;
      for (const auto& slot : row.slots) {
        if (slot[anchor] != na && r.members.count(slot[r.person_var])) member = true;
      }
      if (flagged == member) continue;
      report.violations.push_back({row.id, rules[k].id,
                                   flagged ? ViolationKind::kFlagWithoutMember
                                           : ViolationKind::kMemberWithoutFlag});
      ++report.counts[k];
      any = true;
    }
    if (any) ++report.inconsistent_households;
  }
  for (std::size_t c : report.counts) {
    report.rates.push_back(report.households ? static_cast<double>(c) / static_cast<double>(report.households)
                                             : 0.0);
  }
  return report;
}

void write_sanity_report(const SanityReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  csv::write_row(out, {"household_id", "rule_id", "kind"});
  for (const auto& v : report.violations) {
    csv::write_row(out, {v.household_id, v.rule_id,
                         v.kind == ViolationKind::kFlagWithoutMember ? "flag_without_member"
                                                                     : "member_without_flag"});
  }
}

std::string sanity_summary(const SanityReport& report) {
  std::ostringstream s;
  s << "sanity: " << report.inconsistent_households << " of " << report.households
    << " households inconsistent";
  for (std::size_t k = 0; k < report.rule_ids.size(); ++k) {
    s << "; " << report.rule_ids[k] << "=" << report.counts[k] << " ("
      << csv::format_double(report.rates[k]) << ")";
  }
  return s.str();
}

}  // namespace popsynth
