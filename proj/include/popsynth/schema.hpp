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

#ifndef POPSYNTH_SCHEMA_HPP_
#define POPSYNTH_SCHEMA_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace popsynth {

struct Variable {
  std::string name;
  std::vector<std::string> categories;

  int size() const { return static_cast<int>(categories.size()); }
  // Category index for a label, or -1.
  int index_of(const std::string& label) const;
};

struct SortKey {
  std::string variable;
  bool descending = true;
};

// Categorical schema of the household-person inventory.
//
// Every person variable ends with an explicit "NA" category that marks an
// unused person slot; household variables never carry one.
struct Schema {
  std::vector<Variable> household_vars;
  std::vector<Variable> person_vars;
  // Pinned person window. When empty the observed maximum is used.
  std::optional<int> n_window;
  // Composite person ordering inside a household; the first entry is the
  // primary sort key.
  std::vector<SortKey> sort_keys;
  // Person variable whose NA category decides slot presence on decode.
  std::string presence_anchor;

  int household_index(const std::string& name) const;
  int person_index(const std::string& name) const;
  int na_index(int person_var) const { return person_vars[person_var].size() - 1; }
  int anchor_index() const { return person_index(presence_anchor); }

  // Throws ValidationError naming the offending variable.
  void validate() const;
  // Stable hash of the variable/category structure (not of n_window).
  std::uint64_t fingerprint() const;
};

// Parses the key-value schema format documented in the README:
//
//   n_window = 3
//   person_sort_key = AGEP desc, SEX asc
//   presence_anchor = AGEP
//   household TEN = Owned | Rented
//   person SEX = Male | Female
Schema parse_schema(std::istream& in, const std::string& source);
Schema load_schema(const std::filesystem::path& path);
void write_schema(const Schema& schema, std::ostream& out);

// One contiguous one-hot block: a household variable, or one person variable
// in one slot.
struct ColumnGroup {
  bool household = true;
  int variable = 0;
  int slot = -1;
  Eigen::Index start = 0;
  Eigen::Index width = 0;
};

// Column layout of a restructured row: household groups first, then the
// person groups slot by slot.
class Layout {
 public:
  Layout(std::shared_ptr<const Schema> schema, int n_window);

  const Schema& schema() const { return *schema_; }
  const std::shared_ptr<const Schema>& schema_ptr() const { return schema_; }
  int n_window() const { return n_window_; }
  const std::vector<ColumnGroup>& groups() const { return groups_; }
  Eigen::Index width() const { return width_; }
  Eigen::Index household_width() const { return household_width_; }
  Eigen::Index slot_width() const { return slot_width_; }
  // Group of person variable `var` in slot `slot`.
  const ColumnGroup& person_group(int slot, int var) const;
  const ColumnGroup& household_group(int var) const { return groups_[var]; }
  // Schema fingerprint combined with the window size.
  std::uint64_t fingerprint() const;

 private:
  std::shared_ptr<const Schema> schema_;
  int n_window_;
  std::vector<ColumnGroup> groups_;
  Eigen::Index width_ = 0;
  Eigen::Index household_width_ = 0;
  Eigen::Index slot_width_ = 0;
};

}  // namespace popsynth

#endif  // POPSYNTH_SCHEMA_HPP_
