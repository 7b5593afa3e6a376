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

#ifndef POPSYNTH_ORACLE_HPP_
#define POPSYNTH_ORACLE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "popsynth/generation.hpp"
#include "popsynth/marginals.hpp"
#include "popsynth/schema.hpp"
#include "popsynth/table.hpp"

namespace popsynth::oracle {

// Mixture weights of the hierarchical sampler. Household type drives size,
// which drives the members' ages; tenure and vehicles follow type and size.
struct Mix {
  // senior, family, single-adult
  std::array<double, 3> household_type{0.25, 0.40, 0.35};
  // Added to every type's probability of owning.
  double owned_shift = 0.0;
};

// The tract the targets come from: more seniors, more owners.
Mix shifted_mix();

struct Config {
  std::size_t households = 2000;
  std::size_t tract_households = 600;
  std::uint64_t seed = 0;
  Mix microdata_mix;
  Mix tract_mix = shifted_mix();
};

struct Dataset {
  std::shared_ptr<const Schema> schema;
  std::vector<HouseholdRecord> microdata;
  std::vector<HouseholdRecord> tract;
  TargetMarginals targets;
  std::vector<SanityRule> rules;
};

// Three household variables (TEN, VEH, R65), two person variables (AGEP,
// SEX), n_window = 3.
std::shared_ptr<const Schema> schema();

std::vector<HouseholdRecord> sample_households(const Schema& schema, std::size_t n, const Mix& mix,
                                               std::uint64_t seed);

Dataset make(const Config& config);

// Writes schema.cfg, households.csv, persons.csv, tract_marginals.csv and
// rules.txt into `dir`. Returns the written paths.
std::vector<std::filesystem::path> write(const Dataset& data, const std::filesystem::path& dir);

}  // namespace popsynth::oracle

#endif  // POPSYNTH_ORACLE_HPP_
