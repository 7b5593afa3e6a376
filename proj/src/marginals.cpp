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

#include "popsynth/marginals.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "popsynth/common.hpp"
#include "popsynth/csv.hpp"

namespace popsynth {

const Variable& marginal_variable(const Schema& schema, std::size_t v) {
  return v < schema.household_vars.size()
             ? schema.household_vars[v]
             : schema.person_vars[v - schema.household_vars.size()];
}

Marginals empirical_counts(const RestructuredTable& table) {
  const Schema& s = *table.schema;
  if (table.rows.empty()) throw ValidationError("marginals: empty table");
  Marginals m;
  for (const auto& v : s.household_vars) m.household.push_back(Eigen::VectorXd::Zero(v.size()));
  for (const auto& v : s.person_vars) m.person.push_back(Eigen::VectorXd::Zero(v.size() - 1));
  const int anchor = s.anchor_index();
  const int na = s.na_index(anchor);
  std::size_t persons = 0;
  for (const auto& row : table.rows) {
    for (std::size_t v = 0; v < row.household.size(); ++v) m.household[v](row.household[v]) += 1.0;
    for (const auto& slot : row.slots) {
      if (slot[anchor] == na) continue;
      ++persons;
      for (std::size_t v = 0; v < slot.size(); ++v) {
        if (slot[v] < s.na_index(static_cast<int>(v))) m.person[v](slot[v]) += 1.0;
      }
    }
  }
  if (persons == 0) throw ValidationError("marginals: table has no persons");
  m.n_households = table.rows.size();
  m.n_persons = persons;
  return m;
}

Marginals empirical_marginals(const RestructuredTable& table) {
  Marginals m = empirical_counts(table);
  for (auto& v : m.household) v /= v.sum();
  for (auto& v : m.person) {
    const double total = v.sum();
    if (total > 0) v /= total;
  }
  return m;
}

TargetMarginals load_target_marginals(const std::filesystem::path& path,
                                      const Schema& schema) {
  const auto t = csv::read(path);
  const std::string src = path.string();
  const int cv = t.require_column("variable", src);
  const int cc = t.require_column("category", src);
  const int cn = t.require_column("count_or_proportion", src);

  TargetMarginals m;
  for (const auto& v : schema.household_vars) m.household.push_back(Eigen::VectorXd::Zero(v.size()));
  for (const auto& v : schema.person_vars) m.person.push_back(Eigen::VectorXd::Zero(v.size() - 1));
  const std::size_t n_vars = m.variable_count();
  std::vector<bool> seen(n_vars, false);
  std::optional<double> n_households;

  for (const auto& row : t.rows) {
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(row[cn], &used);
      if (used != row[cn].size()) throw std::invalid_argument(row[cn]);
    } catch (const std::exception&) {
      throw ValidationError(src + ": non-numeric value '" + row[cn] + "' for " + row[cv]);
    }
    if (!std::isfinite(value) || value < 0) {
      throw ValidationError(src + ": negative or non-finite value for " + row[cv] + "/" + row[cc]);
    }
    if (row[cv] == "__n_households__") {
      n_households = value;
      continue;
    }
    if (row[cv] == "__n_persons__") {
      m.n_persons = static_cast<std::size_t>(std::llround(value));
      continue;
    }
    Eigen::VectorXd* target = nullptr;
    const Variable* var = nullptr;
    std::size_t index = 0;
    if (const int h = schema.household_index(row[cv]); h >= 0) {
      target = &m.household[h];
      var = &schema.household_vars[h];
      index = static_cast<std::size_t>(h);
    } else if (const int p = schema.person_index(row[cv]); p >= 0) {
      target = &m.person[p];
      var = &schema.person_vars[p];
      index = schema.household_vars.size() + static_cast<std::size_t>(p);
    } else {
      throw ValidationError(src + ": unknown variable '" + row[cv] + "'");
    }
    const int c = var->index_of(row[cc]);
    if (c < 0 || c >= target->size()) {
      throw ValidationError(src + ": unknown category '" + row[cc] + "' for " + var->name);
    }
    (*target)(c) += value;
    seen[index] = true;
  }
  for (std::size_t v = 0; v < n_vars; ++v) {
    if (!seen[v]) {
      throw ValidationError(src + ": missing variable " + marginal_variable(schema, v).name);
    }
  }
  if (!n_households || *n_households < 0.5) {
    throw ValidationError(src + ": missing or zero __n_households__");
  }
  m.n_households = static_cast<std::size_t>(std::llround(*n_households));

  auto normalize = [&](Eigen::VectorXd& vec, std::size_t v) {
    const double total = vec.sum();
    if (total <= 0) {
      throw ValidationError(src + ": zero total for " + marginal_variable(schema, v).name);
    }
    if (std::abs(total - 1.0) <= 1e-9 && vec.maxCoeff() <= 1.0) return;
    vec /= total;
  };
  for (std::size_t v = 0; v < m.household.size(); ++v) normalize(m.household[v], v);
  for (std::size_t v = 0; v < m.person.size(); ++v) normalize(m.person[v], m.household.size() + v);
  return m;
}

void write_target_marginals(const TargetMarginals& targets, const Schema& schema,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  csv::write_row(out, {"variable", "category", "count_or_proportion"});
  for (std::size_t v = 0; v < targets.variable_count(); ++v) {
    const auto& var = marginal_variable(schema, v);
    const auto& vec = targets.variable(v);
    for (Eigen::Index c = 0; c < vec.size(); ++c) {
      csv::write_row(out, {var.name, var.categories[static_cast<std::size_t>(c)],
                           csv::format_double(vec(c))});
    }
  }
  csv::write_row(out, {"__n_households__", "", std::to_string(targets.n_households)});
  if (targets.n_persons) {
    csv::write_row(out, {"__n_persons__", "", std::to_string(*targets.n_persons)});
  }
}

}  // namespace popsynth
