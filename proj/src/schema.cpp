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

#include "popsynth/schema.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "popsynth/common.hpp"

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

std::vector<SortKey> default_sort_keys(const Schema& schema) {
  // Age descending, then education descending, then sex.
  std::vector<SortKey> keys;
  if (schema.person_index("AGEP") >= 0) keys.push_back({"AGEP", true});
  if (schema.person_index("SCHL") >= 0) keys.push_back({"SCHL", true});
  if (schema.person_index("SEX") >= 0) keys.push_back({"SEX", false});
  if (keys.empty() && !schema.person_vars.empty()) {
    keys.push_back({schema.person_vars.front().name, true});
  }
  return keys;
}

}  // namespace

int Variable::index_of(const std::string& label) const {
  const auto it = std::find(categories.begin(), categories.end(), label);
  return it == categories.end() ? -1 : static_cast<int>(it - categories.begin());
}

int Schema::household_index(const std::string& name) const {
  for (std::size_t i = 0; i < household_vars.size(); ++i) {
    if (household_vars[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Schema::person_index(const std::string& name) const {
  for (std::size_t i = 0; i < person_vars.size(); ++i) {
    if (person_vars[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void Schema::validate() const {
  if (household_vars.empty()) {
    throw ValidationError("schema: no household variables");
  }
  if (person_vars.empty()) {
    throw ValidationError("schema: no person variables");
  }
  std::set<std::string> names;
  auto check_var = [&](const Variable& v, bool person) {
    if (v.name.empty()) throw ValidationError("schema: unnamed variable");
    if (!names.insert(v.name).second) {
      throw ValidationError("schema: duplicate variable '" + v.name + "'");
    }
    const int real = v.size() - (person ? 1 : 0);
    if (real < 1) {
      throw ValidationError("schema: variable '" + v.name +
                            "' has no categories");
    }
    std::set<std::string> labels;
    for (std::size_t i = 0; i < v.categories.size(); ++i) {
      const auto& c = v.categories[i];
      if (c.empty()) {
        throw ValidationError("schema: variable '" + v.name +
                              "' has an empty category label");
      }
      if (!labels.insert(c).second) {
        throw ValidationError("schema: variable '" + v.name +
                              "' repeats category '" + c + "'");
      }
      const bool is_last = i + 1 == v.categories.size();
      if (c == kNaLabel && !(person && is_last)) {
        throw ValidationError(
            "schema: variable '" + v.name +
            (person ? "' must list NA as its last category"
                    : "' is a household variable and cannot have NA"));
      }
    }
    if (person && v.categories.back() != kNaLabel) {
      throw ValidationError("schema: person variable '" + v.name +
                            "' must end with NA");
    }
  };
  for (const auto& v : household_vars) check_var(v, false);
  for (const auto& v : person_vars) check_var(v, true);
  if (n_window && *n_window < 1) {
    throw ValidationError("schema: n_window must be >= 1");
  }
  if (sort_keys.empty()) throw ValidationError("schema: empty person_sort_key");
  for (const auto& key : sort_keys) {
    if (person_index(key.variable) < 0) {
      throw ValidationError("schema: sort key '" + key.variable +
                            "' is not a person variable");
    }
  }
  if (person_index(presence_anchor) < 0) {
    throw ValidationError("schema: presence anchor '" + presence_anchor +
                          "' is not a person variable");
  }
}

std::uint64_t Schema::fingerprint() const {
  Fnv1a h;
  auto put = [&](const std::string& s) {
    h.update(s);
    h.update(std::string_view("\x1f", 1));
  };
  for (const auto& v : household_vars) {
    put("H");
    put(v.name);
    for (const auto& c : v.categories) put(c);
  }
  for (const auto& v : person_vars) {
    put("P");
    put(v.name);
    for (const auto& c : v.categories) put(c);
  }
  return h.digest();
}

Schema parse_schema(std::istream& in, const std::string& source) {
  Schema schema;
  std::string raw;
  int line_no = 0;
  bool have_sort = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(source + ":" + std::to_string(line_no) +
                            ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "n_window") {
      try {
        std::size_t used = 0;
        const int n = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        schema.n_window = n;
      } catch (const std::exception&) {
        throw ValidationError(source + ":" + std::to_string(line_no) +
                              ": n_window is not an integer");
      }
    } else if (key == "person_sort_key") {
      have_sort = true;
      for (const auto& item : split(value, ',')) {
        std::istringstream words(item);
        SortKey sk;
        std::string dir;
        words >> sk.variable >> dir;
        if (dir.empty() || dir == "desc") {
          sk.descending = true;
        } else if (dir == "asc") {
          sk.descending = false;
        } else {
          throw ValidationError(source + ":" + std::to_string(line_no) +
                                ": sort direction must be asc or desc");
        }
        schema.sort_keys.push_back(sk);
      }
    } else if (key == "presence_anchor") {
      schema.presence_anchor = value;
    } else if (key.rfind("household ", 0) == 0 || key.rfind("person ", 0) == 0) {
      const bool person = key[0] == 'p';
      Variable var;
      var.name = trim(key.substr(key.find(' ') + 1));
      if (!value.empty()) var.categories = split(value, '|');
      if (person && std::find(var.categories.begin(), var.categories.end(), kNaLabel) ==
                        var.categories.end()) {
        var.categories.emplace_back(kNaLabel);
      }
      (person ? schema.person_vars : schema.household_vars).push_back(std::move(var));
    } else {
      throw ValidationError(source + ":" + std::to_string(line_no) +
                            ": unknown key '" + key + "'");
    }
  }
  if (!have_sort) schema.sort_keys = default_sort_keys(schema);
  if (schema.presence_anchor.empty() && !schema.sort_keys.empty()) {
    schema.presence_anchor = schema.sort_keys.front().variable;
  }
  schema.validate();
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema " + path.string());
  return parse_schema(in, path.string());
}

void write_schema(const Schema& schema, std::ostream& out) {
  if (schema.n_window) out << "n_window = " << *schema.n_window << '\n';
  out << "person_sort_key = ";
  for (std::size_t i = 0; i < schema.sort_keys.size(); ++i) {
    if (i) out << ", ";
    out << schema.sort_keys[i].variable
        << (schema.sort_keys[i].descending ? " desc" : " asc");
  }
  out << "\npresence_anchor = " << schema.presence_anchor << '\n';
  auto put = [&](const char* kind, const Variable& v) {
    out << kind << ' ' << v.name << " = ";
    for (std::size_t i = 0; i < v.categories.size(); ++i) {
      if (i) out << " | ";
      out << v.categories[i];
    }
    out << '\n';
  };
  for (const auto& v : schema.household_vars) put("household", v);
  for (const auto& v : schema.person_vars) put("person", v);
}

Layout::Layout(std::shared_ptr<const Schema> schema, int n_window)
    : schema_(std::move(schema)), n_window_(n_window) {
  if (!schema_) throw ValidationError("layout: null schema");
  if (n_window_ < 1) throw ValidationError("layout: n_window must be >= 1");
  Eigen::Index col = 0;
  for (std::size_t v = 0; v < schema_->household_vars.size(); ++v) {
    const auto w = schema_->household_vars[v].size();
    groups_.push_back({true, static_cast<int>(v), -1, col, w});
    col += w;
  }
  household_width_ = col;
  for (int slot = 0; slot < n_window_; ++slot) {
    for (std::size_t v = 0; v < schema_->person_vars.size(); ++v) {
      const auto w = schema_->person_vars[v].size();
      groups_.push_back({false, static_cast<int>(v), slot, col, w});
      col += w;
    }
  }
  width_ = col;
  slot_width_ = (width_ - household_width_) / n_window_;
}

const ColumnGroup& Layout::person_group(int slot, int var) const {
  const std::size_t idx = schema_->household_vars.size() +
                          static_cast<std::size_t>(slot) * schema_->person_vars.size() +
                          static_cast<std::size_t>(var);
  return groups_[idx];
}

std::uint64_t Layout::fingerprint() const {
  const std::uint64_t base = schema_->fingerprint();
  Fnv1a h;
  h.update(&base, sizeof(base));
  const std::int64_t n = n_window_;
  h.update(&n, sizeof(n));
  return h.digest();
}

}  // namespace popsynth
