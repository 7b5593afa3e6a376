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

#include <cmath>

#include <gtest/gtest.h>

#include "popsynth/encoding.hpp"
#include "popsynth/oracle.hpp"
#include "popsynth/training.hpp"
#include "test_support.hpp"

namespace popsynth::train {
namespace {

using Mat = Matrix<double>;
using Vec = Vector<double>;

TEST(Lion, ZeroMomentumPositiveGradientStepsByLr) {
  Vec p = Vec::Constant(1, 0.5), g = Vec::Constant(1, 0.3);
  LionState<double> s;
  lion_step<double>({{p.data(), g.data(), 1}}, s, 0.01);
  EXPECT_DOUBLE_EQ(p(0), 0.49);
  EXPECT_NEAR(s.momentum[0](0), 0.01 * 0.3, 1e-15);
  EXPECT_EQ(s.step, 1u);
}

TEST(Lion, ZeroGradientZeroMomentumIsNoop) {
  Vec p = Vec::Constant(3, 0.5), g = Vec::Zero(3);
  LionState<double> s;
  lion_step<double>({{p.data(), g.data(), 3}}, s, 0.1);
  EXPECT_EQ(p, Vec::Constant(3, 0.5));
}

TEST(Lion, UpdateMagnitudeIgnoresGradientScale) {
  Vec p = Vec::Zero(3), g(3);
  g << 1e-8, -5.0, 300.0;
  LionState<double> s;
  lion_step<double>({{p.data(), g.data(), 3}}, s, 0.002);
  EXPECT_TRUE(p.cwiseAbs().isApproxToConstant(0.002));
}

TEST(Lion, WeightDecayAndShapeErrors) {
  Vec p = Vec::Constant(1, 2.0), g = Vec::Zero(1);
  LionState<double> s{{0.9, 0.99, 0.1}, {}, 0};
  lion_step<double>({{p.data(), g.data(), 1}}, s, 0.5);
  EXPECT_DOUBLE_EQ(p(0), 2.0 - 0.5 * 0.1 * 2.0);
  Vec q = Vec::Zero(2), h = Vec::Zero(2);
  EXPECT_THROW(lion_step<double>({{q.data(), h.data(), 2}}, s, 0.1), ValidationError);
}

TEST(Schedule, DefaultEndpoints) {
  const Schedule s;
  EXPECT_DOUBLE_EQ(lr_schedule(0, s), 1e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(999, s), 1e-3);
  EXPECT_NEAR(lr_schedule(3999, s), 1e-4, 1e-18);
  double prev = 1.0;
  for (int e = 0; e < s.epochs; ++e) {
    const double lr = lr_schedule(e, s);
    EXPECT_LE(lr, prev);
    EXPECT_GE(lr, s.min_lr);
    EXPECT_LE(lr, s.initial_lr);
    prev = lr;
  }
}

TEST(Schedule, InvalidConfigs) {
  EXPECT_THROW((Schedule{1e-4, 10, 5, 1e-3}.validate()), ValidationError);
  EXPECT_THROW((Schedule{1e-3, 10, 11, 1e-4}.validate()), ValidationError);
  EXPECT_THROW((Schedule{1e-3, 0, 0, 1e-4}.validate()), ValidationError);
}

TEST(Latent, ShapeSeedAndErrors) {
  const auto a = init_latent<double>(1436, 64, 3);
  EXPECT_EQ(a.values.rows(), 1436);
  EXPECT_EQ(a.values.cols(), 64);
  EXPECT_EQ(init_latent<double>(1436, 64, 3).values, a.values);
  EXPECT_NE(init_latent<double>(1436, 64, 4).values, a.values);
  EXPECT_THROW(init_latent<double>(0, 64, 3), ValidationError);
}

TEST(Latent, SaveLoadRoundTrip) {
  const auto a = init_latent<double>(7, 3, 3);
  const auto dir = testing::temp_dir("lat");
  save_latent(a, dir / "z.bin");
  const auto b = load_latent<double>(dir / "z.bin");
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.seed, b.seed);
  const auto bytes = testing::read_text(dir / "z.bin");
  testing::write_text(dir / "t.bin", bytes.substr(0, 20));
  EXPECT_THROW(load_latent<double>(dir / "t.bin"), ValidationError);
}

class TrainingTest : public ::testing::Test {
 protected:
  oracle::Dataset data = oracle::make({120, 40, 2});
  EncodedMatrix x = encode_onehot(restructure(data.microdata, data.schema));

  static VaeConfig config() {
    VaeConfig c;
    c.latent_dim = 4;
    c.encoder_widths = {16, 16, 12, 12, 8, 8};
    c.decoder_widths = {8, 8, 12, 12, 16, 16};
    c.reparam = nn::ReparamMode::kStandard;
    return c;
  }
  std::vector<PretrainRecord> run_pretrain(VaeModel<double>& m, int epochs) {
    PretrainConfig pc;
    pc.schedule = {1e-3, epochs, epochs / 2, 1e-4};
    pc.seed = 8;
    pc.kl_beta = 0.1;
    return pretrain(m, x.values, pc);
  }
};

TEST_F(TrainingTest, PretrainIsDeterministicAndLowersLoss) {
  auto a = init_model<double>(x.layout, config(), 1);
  auto b = init_model<double>(x.layout, config(), 1);
  const auto ha = run_pretrain(a, 60);
  const auto hb = run_pretrain(b, 60);
  ASSERT_EQ(ha.size(), 60u);
  for (std::size_t i = 0; i < ha.size(); ++i) EXPECT_EQ(ha[i].total, hb[i].total);
  EXPECT_EQ(a.checksum(), b.checksum());
  EXPECT_LT(ha.back().total, ha.front().total);
  EXPECT_EQ(a.mode(), nn::Mode::kEval);
}

TEST_F(TrainingTest, FinetuneFreezesDecoderAndFitsTargets) {
  auto m = init_model<double>(x.layout, config(), 1);
  run_pretrain(m, 40);
  const std::uint64_t dec = m.decoder_checksum();
  const std::uint64_t all = m.checksum();
  auto z = init_latent<double>(data.targets.n_households, m.latent_dim(), 5);
  FinetuneConfig fc;
  fc.schedule = {1e-2, 80, 40, 1e-3};
  const auto r = finetune(m, z, data.targets, x.layout, x.values, fc);
  EXPECT_EQ(m.decoder_checksum(), dec);
  EXPECT_EQ(m.checksum(), all);
  ASSERT_EQ(r.history.size(), 80u);
  EXPECT_LT(r.history.back().marginal_rmse, r.history.front().marginal_rmse);
  EXPECT_TRUE(std::isfinite(r.final_dbce));
}

TEST_F(TrainingTest, FinetuneRejectsMismatches) {
  auto m = init_model<double>(x.layout, config(), 1);
  m.set_mode(nn::Mode::kEval);
  FinetuneConfig fc;
  fc.schedule = {1e-2, 2, 1, 1e-3};
  auto wrong_rows = init_latent<double>(data.targets.n_households + 1, m.latent_dim(), 5);
  EXPECT_THROW(finetune(m, wrong_rows, data.targets, x.layout, x.values, fc), ValidationError);
  auto wrong_cols = init_latent<double>(data.targets.n_households, m.latent_dim() + 1, 5);
  EXPECT_THROW(finetune(m, wrong_cols, data.targets, x.layout, x.values, fc), ValidationError);
  auto z = init_latent<double>(data.targets.n_households, m.latent_dim(), 5);
  const Layout other(data.schema, x.layout.n_window() + 1);
  EXPECT_THROW(finetune(m, z, data.targets, other, x.values, fc), ValidationError);
}

TEST_F(TrainingTest, ReferenceRowsAreASeededSubset) {
  const Mat r1 = reference_rows<double>(x.values, 30, 4);
  const Mat r2 = reference_rows<double>(x.values, 30, 4);
  EXPECT_EQ(r1, r2);
  EXPECT_EQ(r1.rows(), 30);
  EXPECT_EQ(reference_rows<double>(x.values, 0, 4), x.values);
}

TEST_F(TrainingTest, HistoryCsvHasOneLinePerEpoch) {
  auto m = init_model<double>(x.layout, config(), 1);
  const auto h = run_pretrain(m, 4);
  const auto dir = testing::temp_dir("h");
  write_history(h, dir / "h.csv");
  const auto text = testing::read_text(dir / "h.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  EXPECT_EQ(text.rfind("epoch,lr,focal,latent_kl,total", 0), 0u);
}

}  // namespace
}  // namespace popsynth::train
