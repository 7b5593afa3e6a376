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

#include "popsynth/nn.hpp"
#include "popsynth/vae.hpp"
#include "test_support.hpp"

namespace popsynth::nn {
namespace {

using Mat = Matrix<double>;
using Vec = Vector<double>;

Vec flatten(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }
Mat unflatten(const Vec& v, Eigen::Index r, Eigen::Index c) { return Eigen::Map<const Mat>(v.data(), r, c); }

// Scalar objective sum(W .* f(x)) with a fixed random weighting W.
struct Probe {
  Mat weights;
  double operator()(const Mat& y) const { return (weights.array() * y.array()).sum(); }
};

TEST(Affine, ForwardIsXWtPlusB) {
  Affine<double> a(2, 3);
  a.weights() << 1, 2, 3, 4, 5, 6;
  a.bias() << 1, 0, -1;
  Mat x(1, 2);
  x << 1, -1;
  const Mat y = a.forward(x);
  EXPECT_EQ(y, (Mat(1, 3) << 0, -1, -2).finished());
  EXPECT_THROW(a.forward(Mat::Zero(1, 3)), ValidationError);
}

TEST(BatchNorm, TrainNeedsTwoRows) {
  BatchNorm<double> bn(3);
  EXPECT_THROW(bn.forward(Mat::Ones(1, 3), Mode::kTrain), ValidationError);
  EXPECT_NO_THROW(bn.forward(Mat::Ones(1, 3), Mode::kEval));
}

TEST(BatchNorm, TrainOutputIsStandardized) {
  std::mt19937_64 rng(1);
  BatchNorm<double> bn(4);
  const Mat x = testing::random_probabilities(50, 4, rng) * 7.0;
  const Mat y = bn.forward(x, Mode::kTrain);
  EXPECT_LT(y.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  // running stats moved by momentum 0.1 toward the batch
  EXPECT_NEAR(bn.running_mean()(0), 0.1 * x.col(0).mean(), 1e-12);
}

TEST(BatchNorm, EvalTwiceIsIdentical) {
  std::mt19937_64 rng(2);
  BatchNorm<double> bn(3);
  const Mat x = testing::random_probabilities(10, 3, rng);
  bn.forward(x, Mode::kTrain);
  EXPECT_EQ(bn.forward(x, Mode::kEval), bn.forward(x, Mode::kEval));
}

TEST(GroupSoftmax, RowsLieOnSimplexes) {
  GroupSoftmax<double> sm({{0, 2}, {2, 3}, {5, 1}});
  std::mt19937_64 rng(3);
  const Mat x = testing::random_probabilities(20, 6, rng) * 40.0 - Mat::Constant(20, 6, 20.0);
  const Mat y = sm.forward(x);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    EXPECT_NEAR(y.row(r).segment(0, 2).sum(), 1.0, 1e-12);
    EXPECT_NEAR(y.row(r).segment(2, 3).sum(), 1.0, 1e-12);
    EXPECT_EQ(y(r, 5), 1.0);
  }
}

TEST(GroupSoftmax, EmptyOrGappedGroupsRejected) {
  EXPECT_THROW(GroupSoftmax<double>({{0, 0}}), ValidationError);
  EXPECT_THROW(GroupSoftmax<double>({{0, 2}, {3, 1}}), ValidationError);
}

TEST(Relu, GradientMasksNegatives) {
  Relu<double> r;
  Mat x(1, 3);
  x << -1, 0.5, 2;
  r.forward(x);
  EXPECT_EQ(r.backward(Mat::Ones(1, 3)), (Mat(1, 3) << 0, 1, 1).finished());
}

// Input gradient of a Sequential stack under both modes.
TEST(Sequential, InputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    Sequential<double> net;
    Affine<double> a(5, 4);
    a.init(rng);
    net.add(a);
    net.add(BatchNorm<double>(4));
    net.add(Relu<double>());
    Affine<double> b(4, 6);
    b.init(rng);
    net.add(b);
    net.add(GroupSoftmax<double>({{0, 2}, {2, 4}}));
    if (mode == Mode::kEval) {
      auto& bn = std::get<BatchNorm<double>>(net.layers()[1]);
      bn.running_mean() << 0.1, -0.2, 0.3, 0.0;
      bn.running_var() << 0.5, 1.5, 2.0, 0.8;
    }
    Probe probe{testing::random_probabilities(6, 6, rng)};
    const Mat x0 = testing::random_probabilities(6, 5, rng);
    auto f = [&](const Vec& p, Vec* grad) {
      const Mat y = net.forward(unflatten(p, 6, 5), mode);
      if (grad) *grad = flatten(net.backward(probe.weights));
      return probe(y);
    };
    const auto check = check_gradients<double>(f, flatten(x0), 1e-5);
    EXPECT_LE(check.max_relative_error, 1e-4) << "mode " << static_cast<int>(mode);
  }
}

TEST(Sequential, BackwardWithoutForwardThrows) {
  Sequential<double> net;
  net.add(Relu<double>());
  EXPECT_THROW(net.backward(Mat::Ones(1, 1)), RuntimeError);
}

TEST(Sequential, FrozenBackwardLeavesParameterGradients) {
  std::mt19937_64 rng(5);
  Sequential<double> net;
  Affine<double> a(3, 2);
  a.init(rng);
  net.add(a);
  net.forward(Mat::Ones(4, 3), Mode::kTrain);
  net.backward(Mat::Ones(4, 2), /*accumulate_params=*/false);
  EXPECT_TRUE(std::get<Affine<double>>(net.layers()[0]).grad_weights().isZero());
}

TEST(Reparameterize, LiteralAndStandardModes) {
  Mat mu(1, 2), ls(1, 2), eps(1, 2);
  mu << 1, 2;
  ls << 0.5, std::log(4.0);
  eps << 2, -1;
  EXPECT_TRUE(reparameterize(mu, ls, eps, ReparamMode::kLiteral).isApprox((Mat(1, 2) << 2, 2 - std::log(4.0)).finished()));
  EXPECT_TRUE(reparameterize(mu, ls, eps, ReparamMode::kStandard)
                  .isApprox((Mat(1, 2) << 1 + 2 * std::exp(0.25), 0).finished()));
}

TEST(Reparameterize, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const Mat eps = testing::random_probabilities(3, 2, rng);
  const Mat w = testing::random_probabilities(3, 2, rng);
  for (auto mode : {ReparamMode::kLiteral, ReparamMode::kStandard}) {
    auto f = [&](const Vec& p, Vec* grad) {
      const Mat mu = unflatten(p.head(6), 3, 2);
      const Mat ls = unflatten(p.tail(6), 3, 2);
      if (grad) {
        auto [dm, dl] = reparameterize_backward<double>(w, ls, eps, mode);
        grad->resize(12);
        grad->head(6) = flatten(dm);
        grad->tail(6) = flatten(dl);
      }
      return (w.array() * reparameterize(mu, ls, eps, mode).array()).sum();
    };
    Vec p(12);
    for (Eigen::Index i = 0; i < 12; ++i) p(i) = 0.1 * static_cast<double>(i) - 0.4;
    EXPECT_LE(check_gradients<double>(f, p, 1e-6).max_relative_error, 1e-6);
  }
}

TEST(GradientCheck, DetectsAWrongGradient) {
  auto f = [](const Vec& p, Vec* grad) {
    if (grad) *grad = 3.0 * p;  // true gradient is 2p
    return p.squaredNorm();
  };
  EXPECT_GT(check_gradients<double>(f, Vec::Ones(3), 1e-5).max_relative_error, 0.1);
  EXPECT_THROW(check_gradients<double>(f, Vec::Ones(3), 0.0), ValidationError);
}

}  // namespace
}  // namespace popsynth::nn
