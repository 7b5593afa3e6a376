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
#include <random>

#include <gtest/gtest.h>

#include "brute_force.hpp"
#include "popsynth/encoding.hpp"
#include "popsynth/losses.hpp"
#include "popsynth/oracle.hpp"
#include "test_support.hpp"

namespace popsynth::loss {
namespace {

using Mat = Matrix<double>;
using Vec = Vector<double>;

Vec flat(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }
Mat shaped(const Vec& v, Eigen::Index r, Eigen::Index c) { return Eigen::Map<const Mat>(v.data(), r, c); }

TEST(Bce, KnownValue) {
  Mat p(1, 2), t(1, 2);
  p << 0.9, 0.2;
  t << 1, 0;
  EXPECT_NEAR(bce_loss(p, t).value, -(std::log(0.9) + std::log(0.8)), 1e-15);
}

TEST(Bce, ClampKeepsValuesFinite) {
  Mat p(1, 2), t(1, 2);
  p << 0.0, 1.0;
  t << 1, 0;
  const auto r = bce_loss(p, t);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_NEAR(r.value, -2.0 * std::log(1e-7), 1e-6);
  EXPECT_TRUE(r.grad.isZero());
}

TEST(Focal, SingleEntryExample) {
  Mat p(1, 1), t(1, 1);
  p << 0.9;
  t << 1;
  EXPECT_NEAR(focal_loss(p, t, {0.25, 2.0}).value, 2.634e-4, 5e-8);
}

TEST(Focal, GammaZeroHalfAlphaIsHalfBce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat p = testing::random_probabilities(4, 7, rng);
    const Mat t = testing::random_onehot(4, 7, rng);
    const double f = focal_loss(p, t, {0.5, 0.0}).value;
    const double b = bce_loss(p, t).value;
    EXPECT_LE(std::abs(f - 0.5 * b), 1e-9 * std::abs(b));
  }
}

TEST(Focal, InvalidParameters) {
  EXPECT_THROW(focal_loss(Mat(Mat::Constant(1, 1, 0.5)), Mat(Mat::Ones(1, 1)), {1.5, 2.0}), ValidationError);
  EXPECT_THROW(focal_loss(Mat(Mat::Constant(1, 1, 0.5)), Mat(Mat::Ones(1, 1)), {0.5, -1.0}), ValidationError);
  EXPECT_THROW(bce_loss(Mat(Mat::Constant(1, 2, 0.5)), Mat(Mat::Ones(1, 3))), ValidationError);
}

TEST(Gradients, BceAndFocal) {
  std::mt19937_64 rng(12);
  const Mat t = testing::random_onehot(3, 5, rng);
  const Mat p0 = testing::random_probabilities(3, 5, rng);
  auto bce = [&](const Vec& v, Vec* g) {
    const auto r = bce_loss(shaped(v, 3, 5), t);
    if (g) *g = flat(r.grad);
    return r.value;
  };
  EXPECT_LE(nn::check_gradients<double>(bce, flat(p0), 1e-6).max_relative_error, 1e-5);
  for (double gamma : {0.0, 1.0, 2.0, 2.5}) {
    auto focal = [&](const Vec& v, Vec* g) {
      const auto r = focal_loss(shaped(v, 3, 5), t, {0.3, gamma});
      if (g) *g = flat(r.grad);
      return r.value;
    };
    EXPECT_LE(nn::check_gradients<double>(focal, flat(p0), 1e-6).max_relative_error, 1e-5) << gamma;
  }
}

TEST(Gradients, LatentKl) {
  std::mt19937_64 rng(13);
  const Mat mu0 = testing::random_probabilities(4, 3, rng) - Mat::Constant(4, 3, 0.5);
  const Mat ls0 = testing::random_probabilities(4, 3, rng) - Mat::Constant(4, 3, 0.5);
  auto f = [&](const Vec& v, Vec* g) {
    const auto r = latent_kl<double>(shaped(v.head(12), 4, 3), shaped(v.tail(12), 4, 3));
    if (g) {
      g->resize(24);
      g->head(12) = flat(r.grad_mu);
      g->tail(12) = flat(r.grad_logsig);
    }
    return r.value;
  };
  Vec p(24);
  p << flat(mu0), flat(ls0);
  EXPECT_LE(nn::check_gradients<double>(f, p, 1e-6).max_relative_error, 1e-6);
  EXPECT_NEAR(latent_kl<double>(Mat::Zero(2, 2), Mat::Zero(2, 2)).value, 0.0, 1e-15);
}

TEST(Softmin, LowTemperatureApproachesHardMin) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vec v(9);
    for (auto& x : v) x = u(rng);
    const Vec w = softmin<double>(v, 1e-3);
    EXPECT_NEAR(w.dot(v), v.minCoeff(), 1e-3);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  }
  EXPECT_THROW(softmin<double>(Vec::Ones(2), 0.0), ValidationError);
}

TEST(Dbce, MatchesBruteForce) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> size(1, 8), width(1, 12);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = size(rng), nt = size(rng), d = width(rng);
    const Mat x = testing::random_onehot(n, d, rng);
    const Mat g = testing::random_probabilities(nt, d, rng);
    for (double tau : {0.05, 1.0}) {
      const auto fast = dbce<double>(g, x, {tau, 1e-6, false});
      const auto slow = brute::dbce(g, x, tau, 1e-6);
      EXPECT_NEAR(fast.dbce_loss, slow.loss, 1e-9);
      EXPECT_NEAR(fast.norm_kl, slow.norm_kl, 1e-9);
      for (int j = 0; j < n; ++j) EXPECT_NEAR(fast.soft_index(j), slow.soft_index[j], 1e-9);
      EXPECT_NEAR(fast.soft_index.sum(), nt, 1e-9);
    }
  }
}

TEST(Dbce, SelfReconstructionIsNearZero) {
  const auto data = oracle::make({60, 10, 3});
  const Mat x = encode_onehot(restructure(data.microdata, data.schema)).values;
  // Unique rows only: duplicates split the soft index between them.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    bool dup = false;
    for (auto j : keep) dup = dup || x.row(i) == x.row(j);
    if (!dup) keep.push_back(i);
  }
  Mat u(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) u.row(static_cast<Eigen::Index>(i)) = x.row(keep[i]);
  const Mat clamped = u.cwiseMax(kClamp).cwiseMin(1 - kClamp);
  const auto r = dbce<double>(clamped, u, {0.01, 1e-6, false});
  EXPECT_LE(r.dbce_loss, 1e-4);
  EXPECT_LE(r.norm_kl, 1e-4);
}

TEST(Dbce, GradientsOfBothOutputs) {
  std::mt19937_64 rng(16);
  const Mat x = testing::random_onehot(5, 6, rng);
  const Mat g0 = testing::random_probabilities(4, 6, rng);
  for (double tau : {0.3, 1.0}) {
    auto loss = [&](const Vec& v, Vec* grad) {
      const auto r = dbce<double>(shaped(v, 4, 6), x, {tau, 1e-6, grad != nullptr});
      if (grad) *grad = flat(r.grad_dbce);
      return r.dbce_loss;
    };
    auto kl = [&](const Vec& v, Vec* grad) {
      const auto r = dbce<double>(shaped(v, 4, 6), x, {tau, 1e-6, grad != nullptr});
      if (grad) *grad = flat(r.grad_norm_kl);
      return r.norm_kl;
    };
    EXPECT_LE(nn::check_gradients<double>(loss, flat(g0), 1e-6).max_relative_error, 1e-4);
    EXPECT_LE(nn::check_gradients<double>(kl, flat(g0), 1e-6).max_relative_error, 1e-4);
  }
}

TEST(Dbce, Errors) {
  EXPECT_THROW(dbce<double>(Mat::Constant(2, 3, 0.5), Mat::Ones(2, 4)), ValidationError);
  EXPECT_THROW(dbce<double>(Mat::Constant(2, 3, 0.5), Mat(0, 3)), ValidationError);
  EXPECT_THROW(dbce<double>(Mat::Constant(2, 3, 0.5), Mat::Ones(2, 3), {0.0}), ValidationError);
}

class MarginalLossTest : public ::testing::Test {
 protected:
  oracle::Dataset data = oracle::make({80, 30, 8});
  RestructuredTable table = restructure(data.microdata, data.schema);
  Layout layout = table.layout();
};

TEST_F(MarginalLossTest, ExactMatchHasZeroLossAndGradient) {
  const Mat x = encode_onehot(table).values;
  const auto r = marginal_rmse_loss<double>(x, empirical_marginals(table), layout);
  EXPECT_NEAR(r.value, 0.0, 1e-12);
  EXPECT_TRUE(r.grad.isZero());
  EXPECT_EQ(r.soft.n_persons, table.person_count());
}

TEST_F(MarginalLossTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const Eigen::Index rows = 6;
  Mat p = testing::random_probabilities(rows, layout.width(), rng);
  for (const auto& g : layout.groups()) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      p.row(r).segment(g.start, g.width) /= p.row(r).segment(g.start, g.width).sum();
    }
  }
  auto f = [&](const Vec& v, Vec* grad) {
    const auto r = marginal_rmse_loss<double>(shaped(v, rows, layout.width()), data.targets, layout);
    if (grad) *grad = flat(r.grad);
    return r.value;
  };
  EXPECT_LE(nn::check_gradients<double>(f, flat(p), 1e-7).max_relative_error, 1e-5);
}

TEST_F(MarginalLossTest, NoPersonMassIsAnError) {
  Mat x = encode_onehot(table).values.topRows(2);
  for (int slot = 0; slot < layout.n_window(); ++slot) {
    const auto& g = layout.person_group(slot, data.schema->anchor_index());
    x.middleCols(g.start, g.width).setZero();
    x.col(g.start + g.width - 1).setOnes();
  }
  EXPECT_THROW(marginal_rmse_loss<double>(x, data.targets, layout), ValidationError);
}

}  // namespace
}  // namespace popsynth::loss
