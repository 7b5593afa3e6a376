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

#include "popsynth/csv.hpp"
#include "popsynth/training.hpp"

namespace popsynth::train {

void write_history(const std::vector<PretrainRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  csv::write_row(out, {"epoch", "lr", "focal", "latent_kl", "total"});
  for (const auto& r : history) {
    csv::write_row(out, {std::to_string(r.epoch), csv::format_double(r.lr), csv::format_double(r.focal),
                         csv::format_double(r.kl), csv::format_double(r.total)});
  }
}

void write_history(const std::vector<FinetuneRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  csv::write_row(out, {"epoch", "lr", "marginal_rmse", "dbce", "norm_kl", "total"});
  for (const auto& r : history) {
    csv::write_row(out, {std::to_string(r.epoch), csv::format_double(r.lr),
                         csv::format_double(r.marginal_rmse), csv::format_double(r.dbce),
                         csv::format_double(r.norm_kl), csv::format_double(r.total)});
  }
}

}  // namespace popsynth::train
