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

#ifndef POPSYNTH_GENERATION_HPP_
#define POPSYNTH_GENERATION_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "popsynth/encoding.hpp"
#include "popsynth/table.hpp"
#include "popsynth/training.hpp"
#include "popsynth/vae.hpp"

namespace popsynth {

struct Provenance {
  std::uint64_t model_fingerprint = 0;
  std::uint64_t model_checksum = 0;
  std::uint64_t latent_seed = 0;
  std::uint64_t decode_seed = 0;
  DecodeMode mode = DecodeMode::kArgmax;
  std::string tract_id;
  std::size_t requested_households = 0;
  std::size_t dropped_empty_households = 0;
  std::size_t slot_disagreements = 0;
};

// Household-person inventory. Every household has 1..n_window persons and
// ids are sequential from 1.
struct SyntheticInventory {
  RestructuredTable table;
  Provenance provenance;
};

// Decodes every latent row, discretizes it, and drops households whose
// decoded size is zero (counted in the provenance).
template <typename Scalar>
SyntheticInventory generate_inventory(VaeModel<Scalar>& model, const train::LatentMatrix<Scalar>& latent,
                                      const Layout& layout, DecodeMode mode, std::uint64_t seed,
                                      std::string tract_id = {});

void write_inventory(const SyntheticInventory& inventory, const std::filesystem::path& household_path,
                     const std::filesystem::path& person_path,
                     const std::filesystem::path& provenance_path);

// A consistency rule between a household flag and its members:
// (household_var == flag_value) <=> (some member has person_var in
// member_categories).
struct SanityRule {
  std::string id;
  std::string household_var;
  std::string flag_value;
  std::string person_var;
  std::vector<std::string> member_categories;
};

enum class ViolationKind { kFlagWithoutMember, kMemberWithoutFlag };

struct Violation {
  std::string household_id;
  std::string rule_id;
  ViolationKind kind;
};

struct SanityReport {
  std::vector<std::string> rule_ids;
  std::vector<Violation> violations;
  std::vector<std::size_t> counts;  // per rule
  std::vector<double> rates;        // per rule, count / households
  std::size_t households = 0;
  std::size_t inconsistent_households = 0;  // households with any violation
};

// Rules file: one rule per line,
//   id | household var | flag value | person var | cat1; cat2; ...
std::vector<SanityRule> load_sanity_rules(const std::filesystem::path& path);
void write_sanity_rules(const std::vector<SanityRule>& rules, std::ostream& out);

// R65: R65=Yes <=> any AGEP bin >= "65-69".
// R18: R18=Yes <=> any AGEP bin up to "15-19" (binned ages cannot resolve
// exactly 18, so the 15-19 bin counts as a minor).
std::vector<SanityRule> default_sanity_rules();

// Throws ValidationError when a rule references an unknown variable or
// category.
void validate_rule(const SanityRule& rule, const Schema& schema);

SanityReport sanity_check(const RestructuredTable& table, const std::vector<SanityRule>& rules);

void write_sanity_report(const SanityReport& report, const std::filesystem::path& path);
std::string sanity_summary(const SanityReport& report);

}  // namespace popsynth

#endif  // POPSYNTH_GENERATION_HPP_
