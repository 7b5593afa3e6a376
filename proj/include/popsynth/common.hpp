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

#ifndef POPSYNTH_COMMON_HPP_
#define POPSYNTH_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace popsynth {

// Raised for malformed inputs: bad files, schema violations, shape mismatches.
// The CLI maps it to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a computation cannot proceed (non-finite loss, I/O failure).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a, used for schema/model fingerprints and output checksums.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= kPrime;
    }
    return *this;
  }
  Fnv1a& update(const void* data, std::size_t size) {
    return update(std::string_view(static_cast<const char*>(data), size));
  }
  std::uint64_t digest() const { return state_; }

 private:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t state_ = kOffset;
};

std::string to_hex(std::uint64_t value);

// splitmix64 finalizer; derives independent stream seeds from (seed, counter).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::string_view kNaLabel = "NA";
inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace popsynth

#endif  // POPSYNTH_COMMON_HPP_
