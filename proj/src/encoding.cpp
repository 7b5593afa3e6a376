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

#include "popsynth/encoding.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "popsynth/common.hpp"
#include "popsynth/csv.hpp"

namespace popsynth {
namespace {

// Index of the largest entry in [first, first+count); lowest index on ties.
int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row, Eigen::Index first,
           Eigen::Index count) {
  int best = 0;
  for (Eigen::Index c = 1; c < count; ++c) {
    if (row(first + c) > row(first + best)) best = static_cast<int>(c);
  }
  return best;
}

int draw(const Eigen::Ref<const Eigen::RowVectorXd>& row, Eigen::Index first,
         Eigen::Index count, std::mt19937_64& rng) {
  double total = 0.0;
  for (Eigen::Index c = 0; c < count; ++c) total += row(first + c);
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  for (Eigen::Index c = 0; c < count; ++c) {
    acc += row(first + c);
    if (u < acc) return static_cast<int>(c);
  }
  // Rounding can leave u == total; fall back to the last positive entry.
  for (Eigen::Index c = count - 1; c > 0; --c) {
    if (row(first + c) > 0.0) return static_cast<int>(c);
  }
  return 0;
}

}  // namespace

EncodedMatrix encode_onehot(const RestructuredTable& table) {
  EncodedMatrix m{table.layout(), {}};
  const auto& layout = m.layout;
  m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.rows.size()), layout.width());
  const std::size_t n_hh = table.schema->household_vars.size();
  const std::size_t n_pv = table.schema->person_vars.size();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t v = 0; v < n_hh; ++v) {
      m.values(r, layout.household_group(static_cast<int>(v)).start + row.household[v]) = 1.0;
    }
    for (int k = 0; k < table.n_window; ++k) {
      for (std::size_t v = 0; v < n_pv; ++v) {
        m.values(r, layout.person_group(k, static_cast<int>(v)).start + row.slots[k][v]) = 1.0;
      }
    }
  }
  return m;
}

DecodeResult decode_onehot(const EncodedMatrix& matrix, DecodeMode mode,
                           std::uint64_t seed) {
  const Layout& layout = matrix.layout;
  const Schema& schema = layout.schema();
  if (matrix.values.cols() != layout.width()) {
    throw ValidationError("decode: matrix width " + std::to_string(matrix.values.cols()) +
                          " does not match layout width " + std::to_string(layout.width()));
  }
  for (const auto& g : layout.groups()) {
    for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
      const double s = matrix.values.row(r).segment(g.start, g.width).sum();
      if (!(std::abs(s - 1.0) <= 1e-6)) {
        throw ValidationError("decode: row " + std::to_string(r) +
                              " group starting at column " + std::to_string(g.start) +
                              " sums to " + std::to_string(s));
      }
    }
  }

  std::mt19937_64 rng(seed);
  auto pick = [&](const Eigen::Ref<const Eigen::RowVectorXd>& row, Eigen::Index first,
                  Eigen::Index count) {
    return mode == DecodeMode::kArgmax ? argmax(row, first, count) : draw(row, first, count, rng);
  };

  DecodeResult out;
  out.table.schema = layout.schema_ptr();
  out.table.n_window = layout.n_window();
  out.table.rows.reserve(static_cast<std::size_t>(matrix.values.rows()));
  const int anchor = schema.anchor_index();
  const int n_pv = static_cast<int>(schema.person_vars.size());
  std::vector<int> na_slot;
  for (int v = 0; v < n_pv; ++v) na_slot.push_back(schema.na_index(v));

  for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
    const Eigen::RowVectorXd row = matrix.values.row(r);
    HouseholdRow hr;
    hr.id = std::to_string(r + 1);
    for (std::size_t v = 0; v < schema.household_vars.size(); ++v) {
      const auto& g = layout.household_group(static_cast<int>(v));
      hr.household.push_back(pick(row, g.start, g.width));
    }
    for (int k = 0; k < layout.n_window(); ++k) {
      const auto& ag = layout.person_group(k, anchor);
      const bool present = pick(row, ag.start, ag.width) != schema.na_index(anchor);
      if (!present) {
        for (int v = 0; v < n_pv; ++v) {
          if (v == anchor) continue;
          const auto& g = layout.person_group(k, v);
          if (pick(row, g.start, g.width) != na_slot[v]) ++out.disagreements;
        }
        continue;
      }
      std::vector<int> person(static_cast<std::size_t>(n_pv));
      for (int v = 0; v < n_pv; ++v) {
        const auto& g = layout.person_group(k, v);
        if (v == anchor) {
          // Re-pick without NA so sample mode draws from the present mass.
          person[v] = mode == DecodeMode::kArgmax ? argmax(row, g.start, g.width - 1)
                                                  : draw(row, g.start, g.width - 1, rng);
          continue;
        }
        int c = pick(row, g.start, g.width);
        if (c == na_slot[v]) {
          ++out.disagreements;
          c = mode == DecodeMode::kArgmax ? argmax(row, g.start, g.width - 1)
                                          : draw(row, g.start, g.width - 1, rng);
        }
        person[v] = c;
      }
      hr.slots.push_back(std::move(person));
    }
    hr.slots.resize(static_cast<std::size_t>(layout.n_window()), na_slot);
    out.table.rows.push_back(std::move(hr));
  }
  return out;
}

Eigen::MatrixXd encode_person_rows(const RestructuredTable& table) {
  const Layout layout = table.layout();
  const Schema& schema = *table.schema;
  const Eigen::Index hw = layout.household_width();
  const Eigen::Index sw = layout.slot_width();
  const auto n = static_cast<Eigen::Index>(table.person_count());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, hw + sw);
  const int anchor = schema.anchor_index();
  const int na = schema.na_index(anchor);
  Eigen::Index r = 0;
  for (const auto& row : table.rows) {
    for (const auto& slot : row.slots) {
      if (slot[anchor] == na) continue;
      for (std::size_t v = 0; v < row.household.size(); ++v) {
        out(r, layout.household_group(static_cast<int>(v)).start + row.household[v]) = 1.0;
      }
      for (std::size_t v = 0; v < slot.size(); ++v) {
        const auto& g = layout.person_group(0, static_cast<int>(v));
        out(r, g.start + slot[v]) = 1.0;
      }
      ++r;
    }
  }
  return out;
}

void write_encoded(const EncodedMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  const Layout& layout = matrix.layout;
  const Schema& s = layout.schema();
  std::vector<std::string> header;
  for (const auto& g : layout.groups()) {
    const auto& var = g.household ? s.household_vars[g.variable] : s.person_vars[g.variable];
    const std::string prefix =
        g.household ? var.name : "p" + std::to_string(g.slot + 1) + "_" + var.name;
    for (const auto& c : var.categories) header.push_back(prefix + "=" + c);
  }
  csv::write_row(out, header);
  std::vector<std::string> fields(static_cast<std::size_t>(matrix.values.cols()));
  for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.values.cols(); ++c) {
      fields[static_cast<std::size_t>(c)] = csv::format_double(matrix.values(r, c));
    }
    csv::write_row(out, fields);
  }
}

}  // namespace popsynth
