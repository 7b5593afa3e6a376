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

#ifndef POPSYNTH_NN_HPP_
#define POPSYNTH_NN_HPP_

// Layer primitives with analytic forward/backward passes. Batches are
// row-major in the mathematical sense: one sample per matrix row.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "popsynth/common.hpp"

namespace popsynth::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

enum class Mode { kTrain, kEval };

// A contiguous parameter array and its gradient accumulator.
template <typename Scalar>
struct ParamBlock {
  Scalar* value;
  Scalar* grad;
  Eigen::Index size;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

template <typename Scalar>
class Affine {
 public:
  Affine() = default;
  Affine(Eigen::Index in, Eigen::Index out)
      : weights_(Matrix<Scalar>::Zero(out, in)),
        bias_(Vector<Scalar>::Zero(out)),
        grad_weights_(Matrix<Scalar>::Zero(out, in)),
        grad_bias_(Vector<Scalar>::Zero(out)) {}

  // Uniform in +-sqrt(6 / (fan_in + fan_out)); zero bias.
  void init(std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_.cols(); ++c) {
        weights_(r, c) = static_cast<Scalar>(dist(rng));
      }
    }
    bias_.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    require_shape(x.cols() == in_dim(), "affine: input width " + std::to_string(x.cols()) +
                                            " != " + std::to_string(in_dim()));
    input_ = x;
    Matrix<Scalar> y = x * weights_.transpose();
    y.rowwise() += bias_.transpose();
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, bool accumulate_params = true) {
    require_shape(dy.cols() == out_dim() && dy.rows() == input_.rows(),
                  "affine: gradient shape mismatch");
    if (accumulate_params) {
      grad_weights_.noalias() += dy.transpose() * input_;
      grad_bias_ += dy.colwise().sum().transpose();
    }
    return dy * weights_;
  }

  void collect(std::vector<ParamBlock<Scalar>>& out) {
    out.push_back({weights_.data(), grad_weights_.data(), weights_.size()});
    out.push_back({bias_.data(), grad_bias_.data(), bias_.size()});
  }
  void zero_grad() {
    grad_weights_.setZero();
    grad_bias_.setZero();
  }

  Eigen::Index in_dim() const { return weights_.cols(); }
  Eigen::Index out_dim() const { return weights_.rows(); }
  Matrix<Scalar>& weights() { return weights_; }
  const Matrix<Scalar>& weights() const { return weights_; }
  Vector<Scalar>& bias() { return bias_; }
  const Vector<Scalar>& bias() const { return bias_; }
  const Matrix<Scalar>& grad_weights() const { return grad_weights_; }
  const Vector<Scalar>& grad_bias() const { return grad_bias_; }

 private:
  Matrix<Scalar> weights_;
  Vector<Scalar> bias_;
  Matrix<Scalar> grad_weights_;
  Vector<Scalar> grad_bias_;
  Matrix<Scalar> input_;
};

template <typename Scalar>
class BatchNorm {
 public:
  static constexpr double kDefaultEpsilon = 1e-5;
  static constexpr double kDefaultMomentum = 0.1;

  BatchNorm() = default;
  explicit BatchNorm(Eigen::Index width, double epsilon = kDefaultEpsilon,
                     double momentum = kDefaultMomentum)
      : scale_(Vector<Scalar>::Ones(width)),
        shift_(Vector<Scalar>::Zero(width)),
        running_mean_(Vector<Scalar>::Zero(width)),
        running_var_(Vector<Scalar>::Ones(width)),
        grad_scale_(Vector<Scalar>::Zero(width)),
        grad_shift_(Vector<Scalar>::Zero(width)),
        epsilon_(epsilon),
        momentum_(momentum) {
    require_shape(epsilon > 0, "batchnorm: epsilon must be positive");
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Mode mode) {
    require_shape(x.cols() == width(), "batchnorm: input width mismatch");
    mode_ = mode;
    const auto eps = static_cast<Scalar>(epsilon_);
    if (mode == Mode::kEval) {
      inv_std_ = (running_var_.array() + eps).rsqrt().matrix();
      normalized_ = (x.rowwise() - running_mean_.transpose()).array().rowwise() *
                    inv_std_.transpose().array();
    } else {
      const Eigen::Index n = x.rows();
      if (n < 2) throw ValidationError("batchnorm: train mode needs a batch of at least 2 rows");
      const RowVector<Scalar> mean = x.colwise().mean();
      const Matrix<Scalar> centered = x.rowwise() - mean;
      const RowVector<Scalar> var = centered.array().square().colwise().sum() / static_cast<Scalar>(n);
      inv_std_ = (var.array() + eps).rsqrt().matrix().transpose();
      normalized_ = centered.array().rowwise() * inv_std_.transpose().array();
      const auto m = static_cast<Scalar>(momentum_);
      const Scalar unbias = static_cast<Scalar>(n) / static_cast<Scalar>(n - 1);
      running_mean_ = (Scalar(1) - m) * running_mean_ + m * mean.transpose();
      running_var_ = (Scalar(1) - m) * running_var_ + m * unbias * var.transpose();
    }
    Matrix<Scalar> y = normalized_.array().rowwise() * scale_.transpose().array();
    y.rowwise() += shift_.transpose();
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, bool accumulate_params = true) {
    require_shape(dy.rows() == normalized_.rows() && dy.cols() == width(),
                  "batchnorm: gradient shape mismatch");
    if (accumulate_params) {
      grad_scale_ += (dy.array() * normalized_.array()).colwise().sum().matrix().transpose();
      grad_shift_ += dy.colwise().sum().transpose();
    }
    const Matrix<Scalar> dnorm = dy.array().rowwise() * scale_.transpose().array();
    if (mode_ == Mode::kEval) {
      return dnorm.array().rowwise() * inv_std_.transpose().array();
    }
    const auto n = static_cast<Scalar>(dy.rows());
    const RowVector<Scalar> sum_d = dnorm.colwise().sum();
    const RowVector<Scalar> sum_dx = (dnorm.array() * normalized_.array()).colwise().sum();
    Matrix<Scalar> dx = (n * dnorm).rowwise() - sum_d;
    dx -= (normalized_.array().rowwise() * sum_dx.array()).matrix();
    return dx.array().rowwise() * (inv_std_.transpose().array() / n);
  }

  void collect(std::vector<ParamBlock<Scalar>>& out) {
    out.push_back({scale_.data(), grad_scale_.data(), scale_.size()});
    out.push_back({shift_.data(), grad_shift_.data(), shift_.size()});
  }
  void zero_grad() {
    grad_scale_.setZero();
    grad_shift_.setZero();
  }

  Eigen::Index width() const { return scale_.size(); }
  Vector<Scalar>& scale() { return scale_; }
  Vector<Scalar>& shift() { return shift_; }
  Vector<Scalar>& running_mean() { return running_mean_; }
  Vector<Scalar>& running_var() { return running_var_; }
  const Vector<Scalar>& scale() const { return scale_; }
  const Vector<Scalar>& shift() const { return shift_; }
  const Vector<Scalar>& running_mean() const { return running_mean_; }
  const Vector<Scalar>& running_var() const { return running_var_; }
  const Vector<Scalar>& grad_scale() const { return grad_scale_; }
  const Vector<Scalar>& grad_shift() const { return grad_shift_; }
  double epsilon() const { return epsilon_; }
  double momentum() const { return momentum_; }

 private:
  Vector<Scalar> scale_, shift_, running_mean_, running_var_;
  Vector<Scalar> grad_scale_, grad_shift_;
  double epsilon_ = kDefaultEpsilon;
  double momentum_ = kDefaultMomentum;
  Mode mode_ = Mode::kTrain;
  Matrix<Scalar> normalized_;
  Vector<Scalar> inv_std_;
};

template <typename Scalar>
class Relu {
 public:
  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    mask_ = (x.array() > Scalar(0)).template cast<Scalar>();
    return x.cwiseMax(Scalar(0));
  }
  Matrix<Scalar> backward(const Matrix<Scalar>& dy) const {
    require_shape(dy.rows() == mask_.rows() && dy.cols() == mask_.cols(),
                  "relu: gradient shape mismatch");
    return dy.cwiseProduct(mask_);
  }

 private:
  Matrix<Scalar> mask_;
};

// Column block [start, start + width).
struct Span {
  Eigen::Index start;
  Eigen::Index width;
};

// Softmax applied independently inside each column group.
template <typename Scalar>
class GroupSoftmax {
 public:
  GroupSoftmax() = default;
  explicit GroupSoftmax(std::vector<Span> groups) : groups_(std::move(groups)) {
    Eigen::Index expect = 0;
    for (const auto& g : groups_) {
      if (g.width < 1) throw ValidationError("group softmax: empty group");
      if (g.start != expect) throw ValidationError("group softmax: groups must tile the columns");
      expect += g.width;
    }
    width_ = expect;
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    require_shape(x.cols() == width_, "group softmax: input width mismatch");
    output_.resize(x.rows(), x.cols());
    for (const auto& g : groups_) {
      auto in = x.middleCols(g.start, g.width);
      auto out = output_.middleCols(g.start, g.width);
      const Vector<Scalar> row_max = in.rowwise().maxCoeff();
      out = (in.colwise() - row_max).array().exp().matrix();
      const Vector<Scalar> total = out.rowwise().sum();
      out = out.array().colwise() / total.array();
    }
    return output_;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) const {
    require_shape(dy.rows() == output_.rows() && dy.cols() == output_.cols(),
                  "group softmax: gradient shape mismatch");
    Matrix<Scalar> dx(dy.rows(), dy.cols());
    for (const auto& g : groups_) {
      const auto y = output_.middleCols(g.start, g.width);
      const auto d = dy.middleCols(g.start, g.width);
      const Vector<Scalar> dot = y.cwiseProduct(d).rowwise().sum();
      dx.middleCols(g.start, g.width) = y.cwiseProduct(d.colwise() - dot);
    }
    return dx;
  }

  const std::vector<Span>& groups() const { return groups_; }
  Eigen::Index width() const { return width_; }

 private:
  std::vector<Span> groups_;
  Eigen::Index width_ = 0;
  Matrix<Scalar> output_;
};

// Ordered record of the primitives applied by the last forward pass.
class GradientTape {
 public:
  void record(std::size_t op) { ops_.push_back(op); }
  const std::vector<std::size_t>& ops() const { return ops_; }
  bool empty() const { return ops_.empty(); }
  void clear() { ops_.clear(); }

 private:
  std::vector<std::size_t> ops_;
};

template <typename Scalar>
using Layer = std::variant<Affine<Scalar>, BatchNorm<Scalar>, Relu<Scalar>, GroupSoftmax<Scalar>>;

// A fixed chain of primitives. forward() records each application on the
// tape; backward() replays it in exact reverse order.
template <typename Scalar>
class Sequential {
 public:
  void add(Layer<Scalar> layer) { layers_.push_back(std::move(layer)); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Mode mode) {
    tape_.clear();
    Matrix<Scalar> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = std::visit(
          [&](auto& layer) -> Matrix<Scalar> {
            using L = std::decay_t<decltype(layer)>;
            if constexpr (std::is_same_v<L, BatchNorm<Scalar>>) {
              return layer.forward(h, mode);
            } else {
              return layer.forward(h);
            }
          },
          layers_[i]);
      tape_.record(i);
    }
    return h;
  }

  // With accumulate_params=false the pass only propagates input gradients,
  // leaving every parameter gradient untouched.
  Matrix<Scalar> backward(const Matrix<Scalar>& dy, bool accumulate_params = true) {
    if (tape_.empty()) throw RuntimeError("backward called without a recorded forward pass");
    Matrix<Scalar> g = dy;
    const auto& ops = tape_.ops();
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
      g = std::visit(
          [&](auto& layer) -> Matrix<Scalar> {
            using L = std::decay_t<decltype(layer)>;
            if constexpr (std::is_same_v<L, Affine<Scalar>> || std::is_same_v<L, BatchNorm<Scalar>>) {
              return layer.backward(g, accumulate_params);
            } else {
              return layer.backward(g);
            }
          },
          layers_[*it]);
    }
    tape_.clear();
    return g;
  }

  void collect(std::vector<ParamBlock<Scalar>>& out) {
    for (auto& layer : layers_) {
      std::visit(
          [&](auto& l) {
            if constexpr (requires { l.collect(out); }) l.collect(out);
          },
          layer);
    }
  }
  void zero_grad() {
    for (auto& layer : layers_) {
      std::visit(
          [](auto& l) {
            if constexpr (requires { l.zero_grad(); }) l.zero_grad();
          },
          layer);
    }
  }

  std::vector<Layer<Scalar>>& layers() { return layers_; }
  const std::vector<Layer<Scalar>>& layers() const { return layers_; }
  const GradientTape& tape() const { return tape_; }

 private:
  std::vector<Layer<Scalar>> layers_;
  GradientTape tape_;
};

enum class ReparamMode {
  // z = mu + eps * logsig, exactly as the method writes it.
  kLiteral,
  // z = mu + eps * exp(0.5 * logsig), logsig read as a log-variance.
  kStandard,
};

template <typename Scalar>
Matrix<Scalar> reparameterize(const Matrix<Scalar>& mu, const Matrix<Scalar>& logsig,
                              const Matrix<Scalar>& noise, ReparamMode mode) {
  require_shape(mu.rows() == logsig.rows() && mu.cols() == logsig.cols() &&
                    mu.rows() == noise.rows() && mu.cols() == noise.cols(),
                "reparameterize: length mismatch");
  if (mode == ReparamMode::kLiteral) return mu + noise.cwiseProduct(logsig);
  return mu + noise.cwiseProduct((Scalar(0.5) * logsig.array()).exp().matrix());
}

// Gradients w.r.t. mu and logsig given dL/dz.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> reparameterize_backward(
    const Matrix<Scalar>& dz, const Matrix<Scalar>& logsig, const Matrix<Scalar>& noise,
    ReparamMode mode) {
  if (mode == ReparamMode::kLiteral) return {dz, dz.cwiseProduct(noise)};
  const Matrix<Scalar> scale = (Scalar(0.5) * (Scalar(0.5) * logsig.array()).exp()).matrix();
  return {dz, dz.cwiseProduct(noise).cwiseProduct(scale)};
}

struct GradientCheck {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares the analytic gradient of `f` at `point` against central finite
// differences. `f` returns the value and, when `grad` is non-null, writes the
// analytic gradient. Relative error per coordinate is
// |a - n| / max(|a|, |n|, floor).
template <typename Scalar>
GradientCheck check_gradients(
    const std::function<Scalar(const Vector<Scalar>&, Vector<Scalar>*)>& f,
    const Vector<Scalar>& point, Scalar step, Scalar floor = Scalar(1e-6)) {
  if (!(step > Scalar(0))) throw ValidationError("check_gradients: step must be positive");
  Vector<Scalar> analytic(point.size());
  const Scalar base = f(point, &analytic);
  if (!std::isfinite(static_cast<double>(base)) || !analytic.allFinite()) {
    throw RuntimeError("check_gradients: non-finite value at the base point");
  }
  GradientCheck result;
  Vector<Scalar> probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + step;
    const Scalar up = f(probe, nullptr);
    probe(i) = point(i) - step;
    const Scalar down = f(probe, nullptr);
    probe(i) = point(i);
    if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down))) {
      throw RuntimeError("check_gradients: non-finite value at coordinate " + std::to_string(i));
    }
    const double numeric = static_cast<double>(up - down) / (2.0 * static_cast<double>(step));
    const double a = static_cast<double>(analytic(i));
    const double denom =
        std::max({std::abs(a), std::abs(numeric), static_cast<double>(floor)});
    const double err = std::abs(a - numeric) / denom;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace popsynth::nn

#endif  // POPSYNTH_NN_HPP_
