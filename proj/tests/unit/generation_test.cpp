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

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "popsynth/csv.hpp"
#include "popsynth/encoding.hpp"
#include "popsynth/generation.hpp"
#include "popsynth/oracle.hpp"
#include "popsynth/schema.hpp"
#include "popsynth/training.hpp"
#include "popsynth/vae.hpp"
#include "sanity_fixture.hpp"
#include "test_support.hpp"

namespace popsynth {
namespace {

VaeConfig tiny_config() {
  VaeConfig c;
  c.latent_dim = 4;
  c.encoder_widths = {16, 12, 8, 8, 6, 6};
  c.decoder_widths = {6, 6, 8, 8, 12, 16};
  return c;
}

std::shared_ptr<const Schema> acs_schema() {
  return std::make_shared<const Schema>(load_schema(POPSYNTH_DATA_DIR "/acs_schema.cfg"));
}

class GenerationTest : public ::testing::Test {
 protected:
  oracle::Dataset data = oracle::make({60, 20, 5});
  Layout layout{data.schema, 3};
  VaeModel<double> model{layout, tiny_config()};

  void SetUp() override {
    model.initialize(9);
    model.set_mode(nn::Mode::kEval);
  }
};

TEST_F(GenerationTest, InventoryIsReferentiallyIntact) {
  auto latent = train::init_latent<double>(50, 4, 3);
  SyntheticInventory inv = generate_inventory(model, latent, layout, DecodeMode::kSample, 4, "T1");
  EXPECT_EQ(inv.provenance.requested_households, 50u);
  EXPECT_EQ(inv.table.rows.size() + inv.provenance.dropped_empty_households, 50u);

  const auto dir = testing::temp_dir("inventory");
  write_inventory(inv, dir / "hh.csv", dir / "p.csv", dir / "prov.json");

  const csv::Table hh = csv::read(dir / "hh.csv");
  const csv::Table pp = csv::read(dir / "p.csv");
  std::set<std::string> ids;
  for (const auto& r : hh.rows) EXPECT_TRUE(ids.insert(r[0]).second);
  std::set<std::string> person_ids;
  for (const auto& r : pp.rows) {
    EXPECT_TRUE(person_ids.insert(r[0]).second);
    EXPECT_TRUE(ids.count(r[1])) << r[1];
  }
  EXPECT_EQ(person_ids.size(), inv.table.person_count());

  Microdata back = load_microdata(dir / "hh.csv", dir / "p.csv", *data.schema);
  EXPECT_TRUE(back.warnings.empty());
  RestructuredTable again = restructure(back.households, data.schema, 3);
  ASSERT_EQ(again.rows.size(), inv.table.rows.size());
  for (std::size_t i = 0; i < again.rows.size(); ++i) {
    EXPECT_EQ(again.rows[i].household, inv.table.rows[i].household);
    auto slots = inv.table.rows[i].slots;
    std::sort(slots.begin(), slots.end());
    auto reloaded = again.rows[i].slots;
    std::sort(reloaded.begin(), reloaded.end());
    EXPECT_EQ(reloaded, slots);
  }
}

TEST_F(GenerationTest, ArgmaxIsRepeatable) {
  auto latent = train::init_latent<double>(30, 4, 8);
  auto a = generate_inventory(model, latent, layout, DecodeMode::kArgmax, 1);
  auto b = generate_inventory(model, latent, layout, DecodeMode::kArgmax, 2);
  ASSERT_EQ(a.table.rows.size(), b.table.rows.size());
  for (std::size_t i = 0; i < a.table.rows.size(); ++i) {
    EXPECT_EQ(a.table.rows[i].household, b.table.rows[i].household);
    EXPECT_EQ(a.table.rows[i].slots, b.table.rows[i].slots);
  }
}

TEST_F(GenerationTest, RejectsWrongLatentWidth) {
  auto latent = train::init_latent<double>(5, 3, 1);
  EXPECT_THROW(generate_inventory(model, latent, layout, DecodeMode::kArgmax, 1), ValidationError);
}

TEST(SanityRulesTest, RoundTripsThroughTheRulesFormat) {
  const auto rules = default_sanity_rules();
  std::ostringstream out;
  write_sanity_rules(rules, out);
  const auto path = testing::temp_dir("rules") / "rules.txt";
  testing::write_text(path, "# comment\n\n" + out.str());
  const auto back = load_sanity_rules(path);
  ASSERT_EQ(back.size(), rules.size());
  for (std::size_t i = 0; i < rules.size(); ++i) {
    EXPECT_EQ(back[i].id, rules[i].id);
    EXPECT_EQ(back[i].household_var, rules[i].household_var);
    EXPECT_EQ(back[i].flag_value, rules[i].flag_value);
    EXPECT_EQ(back[i].person_var, rules[i].person_var);
    EXPECT_EQ(back[i].member_categories, rules[i].member_categories);
  }
}

TEST(SanityRulesTest, MalformedLinesAreRejected) {
  const auto dir = testing::temp_dir("bad");
  testing::write_text(dir / "a.txt", "R65 | R65 | Yes\n");
  EXPECT_THROW(load_sanity_rules(dir / "a.txt"), ValidationError);
  testing::write_text(dir / "b.txt", "R65 | R65 | Yes | AGEP | \n");
  EXPECT_THROW(load_sanity_rules(dir / "b.txt"), ValidationError);
  EXPECT_THROW(load_sanity_rules(dir / "missing.txt"), ValidationError);
}

TEST(SanityRulesTest, ValidateNamesUnknownVariables) {
  auto schema = acs_schema();
  SanityRule rule{"X", "R65", "Yes", "AGEP", {"65-69"}};
  EXPECT_NO_THROW(validate_rule(rule, *schema));
  rule.person_var = "AGE";
  try {
    validate_rule(rule, *schema);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("AGE"), std::string::npos);
  }
  rule = {"X", "R65", "Maybe", "AGEP", {"65-69"}};
  EXPECT_THROW(validate_rule(rule, *schema), ValidationError);
}

TEST(SanityCheckTest, FindsExactlyThePlantedViolations) {
  const RestructuredTable table = fixture::sanity_fixture(acs_schema());
  ASSERT_EQ(table.rows.size(), 20u);
  const SanityReport report = sanity_check(table, default_sanity_rules());
  EXPECT_EQ(report.households, 20u);
  EXPECT_EQ(report.inconsistent_households, 2u);
  std::vector<std::string> ids;
  for (const auto& v : report.violations) ids.push_back(v.household_id);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(ids, fixture::planted_violations());

  for (const auto& v : report.violations) {
    if (v.household_id == "H07") {
      EXPECT_EQ(v.rule_id, "R65");
      EXPECT_EQ(v.kind, ViolationKind::kFlagWithoutMember);
    } else {
      EXPECT_EQ(v.rule_id, "R18");
      EXPECT_EQ(v.kind, ViolationKind::kMemberWithoutFlag);
    }
  }
  EXPECT_NE(sanity_summary(report).find("2 of 20"), std::string::npos);
}

TEST(SanityCheckTest, OracleMicrodataIsConsistent) {
  const oracle::Dataset data = oracle::make({300, 50, 17});
  const SanityReport report = sanity_check(restructure(data.microdata, data.schema), data.rules);
  EXPECT_EQ(report.households, 300u);
  EXPECT_TRUE(report.violations.empty());
}

TEST(SanityCheckTest, ReportListsEachViolation) {
  const SanityReport report =
      sanity_check(fixture::sanity_fixture(acs_schema()), default_sanity_rules());
  const auto path = testing::temp_dir("report") / "sanity.csv";
  write_sanity_report(report, path);
  const csv::Table t = csv::read(path);
  EXPECT_EQ(t.header, (std::vector<std::string>{"household_id", "rule_id", "kind"}));
  EXPECT_EQ(t.rows.size(), 2u);
}

}  // namespace
}  // namespace popsynth
