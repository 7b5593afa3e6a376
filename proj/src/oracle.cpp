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

#include "popsynth/oracle.hpp"

#include <fstream>
#include <random>

#include "popsynth/common.hpp"

namespace popsynth::oracle {
namespace {

enum Age { kMinor = 0, kYoung = 1, kMiddle = 2, kSenior = 3 };
enum Sex { kMale = 0, kFemale = 1 };

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  bool bernoulli(double p) { return uniform() < p; }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  template <std::size_t K>
  int categorical(const std::array<double, K>& w) {
    double total = 0;
    for (double v : w) total += v;
    double u = uniform() * total;
    for (std::size_t k = 0; k + 1 < K; ++k) {
      if (u < w[k]) return static_cast<int>(k);
      u -= w[k];
    }
    return static_cast<int>(K - 1);
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

Mix shifted_mix() {
  Mix m;
  m.household_type = {0.40, 0.30, 0.30};
  m.owned_shift = 0.10;
  return m;
}

std::shared_ptr<const Schema> schema() {
  auto s = std::make_shared<Schema>();
  s->household_vars = {{"TEN", {"Owned", "Rented"}},
                       {"VEH", {"No vehicle", "1 vehicle", "2 vehicles", "3 or more"}},
                       {"R65", {"Yes", "No"}}};
  s->person_vars = {{"AGEP", {"Under 18", "18-34", "35-64", "65 and over", std::string(kNaLabel)}},
                    {"SEX", {"Male", "Female", std::string(kNaLabel)}}};
  s->n_window = 3;
  s->sort_keys = {{"AGEP", true}, {"SEX", false}};
  s->presence_anchor = "AGEP";
  s->validate();
  return s;
}

std::vector<HouseholdRecord> sample_households(const Schema& schema, std::size_t n, const Mix& mix,
                                               std::uint64_t seed) {
  if (schema.household_vars.size() != 3 || schema.person_vars.size() != 2) {
    throw ValidationError("oracle sampler needs the oracle schema");
  }
  Sampler s(seed);
  std::vector<HouseholdRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int type = s.categorical(mix.household_type);
    std::vector<std::array<int, 2>> people;
    double owned = 0;
    if (type == 0) {
      const int size = s.bernoulli(0.55) ? 2 : 1;
      people.push_back({kSenior, s.bernoulli(0.55) ? kFemale : kMale});
      if (size == 2) {
        const int sex = people[0][1] == kFemale ? (s.bernoulli(0.9) ? kMale : kFemale)
                                                : (s.bernoulli(0.9) ? kFemale : kMale);
        people.push_back({s.bernoulli(0.75) ? kSenior : kMiddle, sex});
      }
      owned = 0.80;
    } else if (type == 1) {
      const int size = s.bernoulli(0.8) ? 3 : 2;
      const int bracket = s.bernoulli(0.45) ? kYoung : kMiddle;
      const int first_sex = s.bernoulli(0.5) ? kMale : kFemale;
      people.push_back({bracket, first_sex});
      if (size == 3) {
        const int other = s.bernoulli(0.8) ? bracket : (bracket == kYoung ? kMiddle : kYoung);
        const int sex = s.bernoulli(0.85) ? 1 - first_sex : first_sex;
        people.push_back({other, sex});
      }
      people.push_back({kMinor, s.bernoulli(0.5) ? kMale : kFemale});
      owned = bracket == kMiddle ? 0.75 : 0.50;
    } else {
      const double u = s.uniform();
      const int size = u < 0.6 ? 1 : (u < 0.85 ? 2 : 3);
      for (int k = 0; k < size; ++k) {
        people.push_back({s.bernoulli(0.6) ? kYoung : kMiddle, s.bernoulli(0.5) ? kMale : kFemale});
      }
      owned = 0.30;
    }
    const bool own = s.bernoulli(std::min(0.95, owned + mix.owned_shift));
    int adults = 0;
    bool senior = false;
    for (const auto& p : people) {
      adults += p[0] != kMinor;
      senior = senior || p[0] == kSenior;
    }
    std::array<double, 4> veh = own ? std::array<double, 4>{0.04, 0.36, 0.45, 0.15}
                                    : std::array<double, 4>{0.25, 0.50, 0.20, 0.05};
    if (adults >= 2) {
      veh[0] *= 0.3;
      veh[1] *= 0.6;
      veh[3] *= 2.0;
    } else {
      veh[2] *= 0.5;
      veh[3] *= 0.3;
    }
    HouseholdRecord rec;
    rec.id = std::to_string(i + 1);
    rec.household = {own ? 0 : 1, s.categorical(veh), senior ? 0 : 1};
    for (const auto& p : people) rec.persons.push_back({p[0], p[1]});
    sort_persons(rec.persons, schema);
    out.push_back(std::move(rec));
  }
  return out;
}

Dataset make(const Config& config) {
  if (config.households == 0 || config.tract_households == 0) {
    throw ValidationError("oracle: household counts must be positive");
  }
  Dataset d;
  d.schema = schema();
  d.microdata = sample_households(*d.schema, config.households, config.microdata_mix, mix_seed(config.seed, 1));
  d.tract = sample_households(*d.schema, config.tract_households, config.tract_mix, mix_seed(config.seed, 2));
  d.targets = empirical_marginals(restructure(d.tract, d.schema));
  d.rules = {{"R65", "R65", "Yes", "AGEP", {"65 and over"}}};
  return d;
}

std::vector<std::filesystem::path> write(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths{dir / "schema.cfg", dir / "households.csv", dir / "persons.csv",
                                           dir / "tract_marginals.csv", dir / "rules.txt"};
  {
    std::ofstream out(paths[0], std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + paths[0].string());
    write_schema(*data.schema, out);
  }
  write_household_tables(restructure(data.microdata, data.schema), paths[1], paths[2]);
  write_target_marginals(data.targets, *data.schema, paths[3]);
  std::ofstream rules(paths[4], std::ios::binary);
  if (!rules) throw RuntimeError("cannot write " + paths[4].string());
  write_sanity_rules(data.rules, rules);
  return paths;
}

}  // namespace popsynth::oracle
