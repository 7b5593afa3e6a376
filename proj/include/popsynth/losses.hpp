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

#ifndef POPSYNTH_LOSSES_HPP_
#define POPSYNTH_LOSSES_HPP_

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "popsynth/common.hpp"
#include "popsynth/marginals.hpp"
#include "popsynth/nn.hpp"
#include "popsynth/schema.hpp"

namespace popsynth::loss {

using nn::Matrix;
using nn::Vector;

// Probabilities are clamped to [kClamp, 1 - kClamp] before any logarithm.
inline constexpr double kClamp = 1e-7;

template <typename Scalar>
struct LossResult {
  Scalar value = 0;
  Matrix<Scalar> grad;  // d value / d prediction
};

namespace detail {

template <typename Scalar>
Scalar clamp_lo() { return static_cast<Scalar>(kClamp); }
template <typename Scalar>
Scalar clamp_hi() { return Scalar(1) - static_cast<Scalar>(kClamp); }

// Clamped copy plus a 0/1 mask of entries inside the clamp range (the
// clamp passes no gradient outside it).
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> clamp(const Matrix<Scalar>& p) {
  const Scalar lo = clamp_lo<Scalar>(), hi = clamp_hi<Scalar>();
  Matrix<Scalar> c = p.cwiseMax(lo).cwiseMin(hi);
  Matrix<Scalar> mask = ((p.array() >= lo) && (p.array() <= hi)).template cast<Scalar>();
  return {std::move(c), std::move(mask)};
}

inline void require_same(Eigen::Index r1, Eigen::Index c1, Eigen::Index r2, Eigen::Index c2,
                         const char* what) {
  if (r1 != r2 || c1 != c2) {
    throw ValidationError(std::string(what) + ": shape mismatch (" + std::to_string(r1) + "x" +
                          std::to_string(c1) + " vs " + std::to_string(r2) + "x" +
                          std::to_string(c2) + ")");
  }
}

}  // namespace detail

// -(1/N) sum_ij [t log p + (1 - t) log(1 - p)], target t outside the log and
// the clamped prediction p inside.
template <typename Scalar>
LossResult<Scalar> bce_loss(const Matrix<Scalar>& pred, const Matrix<Scalar>& target) {
  detail::require_same(pred.rows(), pred.cols(), target.rows(), target.cols(), "bce_loss");
  const auto [p, mask] = detail::clamp(pred);
  const auto n = static_cast<Scalar>(pred.rows());
  const auto t = target.array();
  const auto pa = p.array();
  LossResult<Scalar> out;
  out.value = -(t * pa.log() + (Scalar(1) - t) * (Scalar(1) - pa).log()).sum() / n;
  out.grad = (-(t / pa - (Scalar(1) - t) / (Scalar(1) - pa)) * mask.array() / n).matrix();
  return out;
}

struct FocalParams {
  double alpha = 0.5;
  double gamma = 2.0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("focal: alpha must lie in [0, 1]");
    if (!(gamma >= 0.0)) throw ValidationError("focal: gamma must be >= 0");
  }
};

// Fraction of zero entries, the default focal alpha for one-hot data.
template <typename Scalar>
double zero_fraction(const Matrix<Scalar>& x) {
  if (x.size() == 0) return 0.5;
  return static_cast<double>((x.array() == Scalar(0)).count()) / static_cast<double>(x.size());
}

// -(1/N) sum_ij [a t (1-p)^g log p + (1-a)(1-t) p^g log(1-p)].
template <typename Scalar>
LossResult<Scalar> focal_loss(const Matrix<Scalar>& pred, const Matrix<Scalar>& target,
                              const FocalParams& params) {
  params.validate();
  detail::require_same(pred.rows(), pred.cols(), target.rows(), target.cols(), "focal_loss");
  const auto [p, mask] = detail::clamp(pred);
  const auto n = static_cast<Scalar>(pred.rows());
  const auto a = static_cast<Scalar>(params.alpha);
  const auto g = static_cast<Scalar>(params.gamma);
  const auto t = target.array();
  const auto pa = p.array();
  const auto q = Scalar(1) - pa;
  const auto logp = pa.log();
  const auto logq = q.log();
  const auto q_g = q.pow(g);
  const auto p_g = pa.pow(g);

  LossResult<Scalar> out;
  out.value = -(a * t * q_g * logp + (Scalar(1) - a) * (Scalar(1) - t) * p_g * logq).sum() / n;
  // d/dp of each term; pow(x, g - 1) is only evaluated where g > 0.
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dpos = q_g / pa;
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dneg = -p_g / q;
  if (params.gamma > 0) {
    dpos -= g * q.pow(g - Scalar(1)) * logp;
    dneg += g * pa.pow(g - Scalar(1)) * logq;
  }
  out.grad = (-(a * t * dpos + (Scalar(1) - a) * (Scalar(1) - t) * dneg) * mask.array() / n).matrix();
  return out;
}

template <typename Scalar>
struct KlResult {
  Scalar value = 0;
  Matrix<Scalar> grad_mu;
  Matrix<Scalar> grad_logsig;
};

// Closed-form KL to the unit normal with logsig read as log-variance,
// averaged over rows.
template <typename Scalar>
KlResult<Scalar> latent_kl(const Matrix<Scalar>& mu, const Matrix<Scalar>& logsig) {
  detail::require_same(mu.rows(), mu.cols(), logsig.rows(), logsig.cols(), "latent_kl");
  const auto n = static_cast<Scalar>(mu.rows());
  const auto e = logsig.array().exp();
  KlResult<Scalar> out;
  out.value = Scalar(-0.5) * (Scalar(1) + logsig.array() - mu.array().square() - e).sum() / n;
  out.grad_mu = mu / n;
  out.grad_logsig = (Scalar(0.5) * (e - Scalar(1)) / n).matrix();
  return out;
}

// softmax(-values / temperature).
template <typename Scalar>
Vector<Scalar> softmin(const Vector<Scalar>& values, Scalar temperature) {
  if (!(temperature > Scalar(0))) throw ValidationError("softmin: temperature must be positive");
  if (!values.allFinite()) throw ValidationError("softmin: non-finite value");
  const Scalar lo = values.minCoeff();
  Vector<Scalar> w = (-(values.array() - lo) / temperature).exp().matrix();
  return w / w.sum();
}

// Smoothed KL sum_i (a_i + eps) log((a_i + eps) / (b_i + eps)).
template <typename Scalar>
Scalar smoothed_kl(const Vector<Scalar>& a, const Vector<Scalar>& b, Scalar eps) {
  const auto as = a.array() + eps;
  return (as * (as / (b.array() + eps)).log()).sum();
}

struct DbceOptions {
  double temperature = 1.0;
  double epsilon = 1e-6;  // smoothing inside norm_kl
  bool gradients = true;
};

template <typename Scalar>
struct DbceResult {
  Scalar dbce_loss = 0;
  Scalar norm_kl = 0;
  Vector<Scalar> soft_index;       // length N, sums to N_t
  Vector<Scalar> per_row_softmin;  // length N_t
  Matrix<Scalar> grad_dbce;        // d dbce_loss / d generated
  Matrix<Scalar> grad_norm_kl;     // d norm_kl / d generated
};

// Pairwise per-column-mean BCE between clamped predictions (rows of `pred`)
// and targets (rows of `target`): out(i, j) = BCE(pred_i, target_j).
template <typename Scalar>
Matrix<Scalar> pairwise_bce(const Matrix<Scalar>& pred, const Matrix<Scalar>& target) {
  const auto [p, mask] = detail::clamp(pred);
  const auto d = static_cast<Scalar>(pred.cols());
  const Matrix<Scalar> log_q = (Scalar(1) - p.array()).log().matrix();
  const Matrix<Scalar> logit = p.array().log().matrix() - log_q;
  Matrix<Scalar> out = logit * target.transpose();
  out.colwise() += log_q.rowwise().sum();
  return -out / d;
}

// Decoupled BCE: every generated row is scored against its soft-nearest
// microdata row. Gradients flow through both the pairwise BCE matrix and the
// soft assignment weights.
template <typename Scalar>
DbceResult<Scalar> dbce(const Matrix<Scalar>& generated, const Matrix<Scalar>& microdata,
                        const DbceOptions& options = {}) {
  if (generated.cols() != microdata.cols()) {
    throw ValidationError("dbce: width mismatch (" + std::to_string(generated.cols()) + " vs " +
                          std::to_string(microdata.cols()) + ")");
  }
  if (microdata.rows() == 0) throw ValidationError("dbce: empty microdata");
  if (generated.rows() == 0) throw ValidationError("dbce: empty generated batch");
  const auto tau = static_cast<Scalar>(options.temperature);
  if (!(tau > Scalar(0))) throw ValidationError("dbce: temperature must be positive");
  const Eigen::Index nt = generated.rows();
  const Eigen::Index n = microdata.rows();
  const auto eps = static_cast<Scalar>(options.epsilon);

  const Matrix<Scalar> bce = pairwise_bce(generated, microdata);  // nt x n
  Matrix<Scalar> weights(nt, n);
  DbceResult<Scalar> out;
  out.per_row_softmin.resize(nt);
  for (Eigen::Index i = 0; i < nt; ++i) {
    const Vector<Scalar> row = bce.row(i).transpose();
    const Vector<Scalar> w = softmin<Scalar>(row, tau);
    weights.row(i) = w.transpose();
    out.per_row_softmin(i) = w.dot(row);
  }
  out.soft_index = weights.colwise().sum().transpose();
  out.dbce_loss = out.per_row_softmin.mean();
  const Vector<Scalar> uniform = Vector<Scalar>::Constant(n, Scalar(1) / static_cast<Scalar>(n));
  const Vector<Scalar> normalized = out.soft_index / static_cast<Scalar>(nt);
  out.norm_kl = smoothed_kl<Scalar>(uniform, normalized, eps);
  if (!options.gradients) return out;

  // d softmin_i / d bce_ij = w_ij (1 - (bce_ij - softmin_i) / tau).
  Matrix<Scalar> g_loss =
      (weights.array() *
       (Scalar(1) - (bce.colwise() - out.per_row_softmin).array() / tau)) /
      static_cast<Scalar>(nt);
  // norm_kl depends on soft_index_j = sum_i w_ij; with c_j = d norm_kl / d
  // soft_index_j the chain through the softmax gives
  // -w_ij (c_j - sum_k c_k w_ik) / tau.
  const Vector<Scalar> c =
      (-(uniform.array() + eps) / (normalized.array() + eps) / static_cast<Scalar>(nt)).matrix();
  const Vector<Scalar> wc = weights * c;
  Matrix<Scalar> g_kl =
      -(weights.array() * ((-wc).replicate(1, n).rowwise() + c.transpose()).array()) / tau;

  // Back through pairwise_bce: d bce_ij / d p_ik = -(1/D)[x_jk/p - (1-x_jk)/(1-p)].
  const auto [p, mask] = detail::clamp(generated);
  const auto d = static_cast<Scalar>(generated.cols());
  auto through_bce = [&](const Matrix<Scalar>& g) -> Matrix<Scalar> {
    const Matrix<Scalar> gx = g * microdata;              // nt x D
    const Vector<Scalar> gsum = g.rowwise().sum();        // nt
    const auto pa = p.array();
    Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> r =
        gx.array() / pa - ((-gx).colwise() + gsum).array() / (Scalar(1) - pa);
    return (-(r * mask.array()) / d).matrix();
  };
  out.grad_dbce = through_bce(g_loss);
  out.grad_norm_kl = through_bce(g_kl);
  return out;
}

template <typename Scalar>
struct MarginalLossResult {
  Scalar value = 0;
  Matrix<Scalar> grad;
  Marginals soft;  // generated soft marginals in target layout
};

// RMSE between the generated soft marginals and the targets, concatenated
// over all variables. Household marginals average over rows; person
// marginals divide expected category mass by expected present-person mass.
template <typename Scalar>
MarginalLossResult<Scalar> marginal_rmse_loss(const Matrix<Scalar>& generated,
                                              const TargetMarginals& targets,
                                              const Layout& layout) {
  const Schema& schema = layout.schema();
  if (generated.cols() != layout.width()) {
    throw ValidationError("marginal_rmse_loss: width mismatch");
  }
  if (targets.household.size() != schema.household_vars.size() ||
      targets.person.size() != schema.person_vars.size()) {
    throw ValidationError("marginal_rmse_loss: targets do not cover every variable");
  }
  const auto nt = static_cast<Scalar>(generated.rows());
  const Vector<Scalar> colsum = generated.colwise().sum().transpose();
  MarginalLossResult<Scalar> out;
  out.soft.n_households = static_cast<std::size_t>(generated.rows());
  out.grad = Matrix<Scalar>::Zero(generated.rows(), generated.cols());

  std::vector<Scalar> diffs;
  for (std::size_t v = 0; v < schema.household_vars.size(); ++v) {
    const auto& g = layout.household_group(static_cast<int>(v));
    if (targets.household[v].size() != g.width) {
      throw ValidationError("marginal_rmse_loss: target size mismatch for " + schema.household_vars[v].name);
    }
    Eigen::VectorXd soft(g.width);
    for (Eigen::Index c = 0; c < g.width; ++c) {
      const Scalar m = colsum(g.start + c) / nt;
      soft(c) = static_cast<double>(m);
      diffs.push_back(m - static_cast<Scalar>(targets.household[v](c)));
    }
    out.soft.household.push_back(std::move(soft));
  }
  // Person categories: numerators and denominators per variable.
  std::vector<Scalar> dens(schema.person_vars.size());
  std::vector<Vector<Scalar>> nums(schema.person_vars.size());
  double persons = 0;
  for (std::size_t v = 0; v < schema.person_vars.size(); ++v) {
    const int var = static_cast<int>(v);
    const Eigen::Index k = schema.person_vars[v].size() - 1;
    if (targets.person[v].size() != k) {
      throw ValidationError("marginal_rmse_loss: target size mismatch for " + schema.person_vars[v].name);
    }
    Vector<Scalar> num = Vector<Scalar>::Zero(k);
    Scalar den = 0;
    for (int slot = 0; slot < layout.n_window(); ++slot) {
      const auto& g = layout.person_group(slot, var);
      num += colsum.segment(g.start, k);
      den += nt - colsum(g.start + k);
    }
    if (!(den >= Scalar(1e-6))) {
      throw ValidationError("marginal_rmse_loss: expected person mass is below 1e-6");
    }
    if (var == schema.anchor_index()) persons = static_cast<double>(den);
    Eigen::VectorXd soft(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const Scalar m = num(c) / den;
      soft(c) = static_cast<double>(m);
      diffs.push_back(m - static_cast<Scalar>(targets.person[v](c)));
    }
    out.soft.person.push_back(std::move(soft));
    nums[v] = std::move(num);
    dens[v] = den;
  }
  out.soft.n_persons = static_cast<std::size_t>(std::llround(persons));

  const auto count = static_cast<Scalar>(diffs.size());
  Scalar sq = 0;
  for (Scalar d : diffs) sq += d * d;
  out.value = std::sqrt(sq / count);
  if (out.value == Scalar(0)) return out;

  // dL/dm = (m - t) / (count * L)
  const Scalar scale = Scalar(1) / (count * out.value);
  std::size_t idx = 0;
  for (std::size_t v = 0; v < schema.household_vars.size(); ++v) {
    const auto& g = layout.household_group(static_cast<int>(v));
    for (Eigen::Index c = 0; c < g.width; ++c) {
      out.grad.col(g.start + c).array() += diffs[idx++] * scale / nt;
    }
  }
  for (std::size_t v = 0; v < schema.person_vars.size(); ++v) {
    const int var = static_cast<int>(v);
    const Eigen::Index k = schema.person_vars[v].size() - 1;
    const Scalar den = dens[v];
    Scalar na_grad = 0;  // d L / d p_NA, shared by every slot's NA column
    for (Eigen::Index c = 0; c < k; ++c) {
      const Scalar dm = diffs[idx++] * scale;
      for (int slot = 0; slot < layout.n_window(); ++slot) {
        out.grad.col(layout.person_group(slot, var).start + c).array() += dm / den;
      }
      na_grad += dm * nums[v](c) / (den * den);
    }
    for (int slot = 0; slot < layout.n_window(); ++slot) {
      out.grad.col(layout.person_group(slot, var).start + k).array() += na_grad;
    }
  }
  return out;
}

}  // namespace popsynth::loss

#endif  // POPSYNTH_LOSSES_HPP_
