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

#ifndef POPSYNTH_MARGINALS_HPP_
#define POPSYNTH_MARGINALS_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "popsynth/schema.hpp"
#include "popsynth/table.hpp"

namespace popsynth {

// Per-variable category proportions. Person vectors exclude the NA category.
struct Marginals {
  std::vector<Eigen::VectorXd> household;
  std::vector<Eigen::VectorXd> person;
  std::size_t n_households = 0;
  std::optional<std::size_t> n_persons;

  std::size_t variable_count() const { return household.size() + person.size(); }
  // Variable v in schema order: household variables first, then persons.
  const Eigen::VectorXd& variable(std::size_t v) const {
    return v < household.size() ? household[v] : person[v - household.size()];
  }
};

// Census-tract targets share the layout of empirical marginals.
using TargetMarginals = Marginals;

// Proportions over households (household vars) and over present persons
// (person vars). Throws ValidationError for an empty table or a table
// without persons.
Marginals empirical_marginals(const RestructuredTable& table);
// Same shape, raw counts instead of proportions.
Marginals empirical_counts(const RestructuredTable& table);

// Reads `variable,category,count_or_proportion` rows plus a
// `__n_households__` row (and optionally `__n_persons__`). Counts are
// normalized per variable; vectors that already sum to 1 are kept verbatim.
TargetMarginals load_target_marginals(const std::filesystem::path& path,
                                      const Schema& schema);
void write_target_marginals(const TargetMarginals& targets, const Schema& schema,
                            const std::filesystem::path& path);

// Variable name in schema order (household first).
const Variable& marginal_variable(const Schema& schema, std::size_t v);

}  // namespace popsynth

#endif  // POPSYNTH_MARGINALS_HPP_
