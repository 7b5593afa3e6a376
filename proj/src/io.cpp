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

#include <fstream>
#include <iterator>
#include <sstream>

#include "popsynth/vae.hpp"

namespace popsynth {
namespace io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw RuntimeError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace io

int peek_model_window(const std::filesystem::path& path) {
  io::Reader r(io::read_file(path), path.string());
  const std::string magic = r.raw(kModelMagic.size());
  if (std::memcmp(magic.data(), kModelMagic.data(), kModelMagic.size()) != 0) {
    throw ValidationError(path.string() + ": not a model file");
  }
  if (r.get<std::uint32_t>() != kModelVersion) {
    throw ValidationError(path.string() + ": unsupported model version");
  }
  r.get<std::uint32_t>();
  r.get<std::uint64_t>();
  return static_cast<int>(r.get<std::uint32_t>());
}

}  // namespace popsynth
