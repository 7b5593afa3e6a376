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

#ifndef POPSYNTH_ENCODING_HPP_
#define POPSYNTH_ENCODING_HPP_

#include <cstdint>
#include <filesystem>

#include <Eigen/Core>

#include "popsynth/schema.hpp"
#include "popsynth/table.hpp"

namespace popsynth {

// N x D matrix whose groups (per the layout) are probability vectors.
struct EncodedMatrix {
  Layout layout;
  Eigen::MatrixXd values;

  std::uint64_t fingerprint() const { return layout.fingerprint(); }
};

EncodedMatrix encode_onehot(const RestructuredTable& table);

enum class DecodeMode { kArgmax, kSample };

struct DecodeResult {
  RestructuredTable table;
  // Variables whose own decoded category disagreed with slot presence as
  // decided by the presence anchor.
  std::size_t disagreements = 0;
};

// Picks one category per group. A slot is absent iff its anchor group
// decodes to NA; other variables of an absent slot are forced to NA, and a
// present slot never takes NA (the best non-NA category is used instead).
// Present slots are compacted to the front. Throws ValidationError when a
// group does not sum to 1 within 1e-6.
DecodeResult decode_onehot(const EncodedMatrix& matrix, DecodeMode mode,
                           std::uint64_t seed);

// Household-level one-hot rows for person-level analyses: each present
// person slot joined with its household's variables.
Eigen::MatrixXd encode_person_rows(const RestructuredTable& table);

void write_encoded(const EncodedMatrix& matrix, const std::filesystem::path& path);

}  // namespace popsynth

#endif  // POPSYNTH_ENCODING_HPP_
