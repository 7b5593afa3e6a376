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

#ifndef POPSYNTH_TRAINING_HPP_
#define POPSYNTH_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "popsynth/common.hpp"
#include "popsynth/losses.hpp"
#include "popsynth/marginals.hpp"
#include "popsynth/nn.hpp"
#include "popsynth/vae.hpp"

namespace popsynth::train {

using nn::Matrix;
using nn::Vector;

// Lion: sign of interpolated momentum, decoupled weight decay.
struct LionConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.0;
};

template <typename Scalar>
struct LionState {
  LionConfig config;
  std::vector<Vector<Scalar>> momentum;
  std::uint64_t step = 0;
};

template <typename Scalar>
void lion_step(const std::vector<nn::ParamBlock<Scalar>>& params, LionState<Scalar>& state,
               double lr) {
  if (state.momentum.empty()) {
    for (const auto& p : params) state.momentum.push_back(Vector<Scalar>::Zero(p.size));
  }
  if (state.momentum.size() != params.size()) {
    throw ValidationError("lion: parameter block count changed");
  }
  const auto b1 = static_cast<Scalar>(state.config.beta1);
  const auto b2 = static_cast<Scalar>(state.config.beta2);
  const auto wd = static_cast<Scalar>(state.config.weight_decay);
  const auto rate = static_cast<Scalar>(lr);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.momentum[k];
    if (m.size() != params[k].size) throw ValidationError("lion: buffer shape mismatch");
    Eigen::Map<Vector<Scalar>> p(params[k].value, params[k].size);
    Eigen::Map<const Vector<Scalar>> g(params[k].grad, params[k].size);
    const Vector<Scalar> c = b1 * m + (Scalar(1) - b1) * g;
    p -= rate * (c.array().sign().matrix() + wd * p);
    m = b2 * m + (Scalar(1) - b2) * g;
  }
  ++state.step;
}

struct Schedule {
  double initial_lr = 1e-3;
  int epochs = 4000;
  int decay_start_epoch = 1000;
  double min_lr = 1e-4;

  void validate() const {
    if (epochs < 1) throw ValidationError("schedule: epochs must be >= 1");
    if (!(min_lr > 0 && min_lr <= initial_lr)) {
      throw ValidationError("schedule: need 0 < min_lr <= initial_lr");
    }
    if (decay_start_epoch < 0 || decay_start_epoch > epochs) {
      throw ValidationError("schedule: decay_start_epoch must lie in [0, epochs]");
    }
  }
};

// Constant until decay_start_epoch, then exponential so the final epoch is
// exactly min_lr.
inline double lr_schedule(int epoch, const Schedule& s) {
  if (epoch < s.decay_start_epoch) return s.initial_lr;
  const int span = s.epochs - 1 - s.decay_start_epoch;
  if (span <= 0) return s.min_lr;
  if (epoch >= s.epochs - 1) return s.min_lr;
  const double ratio = std::pow(s.min_lr / s.initial_lr, 1.0 / span);
  return std::max(s.min_lr, s.initial_lr * std::pow(ratio, epoch - s.decay_start_epoch));
}

struct PretrainConfig {
  Schedule schedule;
  LionConfig lion;
  std::uint64_t seed = 0;
  double kl_beta = 1.0;
  // Empty alpha means "fraction of zeros in the encoded microdata".
  std::optional<double> focal_alpha;
  double focal_gamma = 2.0;
};

struct PretrainRecord {
  int epoch;
  double lr;
  double focal;
  double kl;
  double total;
};

// Standard-normal noise for one epoch, from a counter-based stream.
template <typename Scalar>
Matrix<Scalar> epoch_noise(std::uint64_t seed, std::uint64_t epoch, Eigen::Index rows,
                           Eigen::Index cols) {
  std::mt19937_64 rng(mix_seed(seed, epoch));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<Scalar> out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = static_cast<Scalar>(normal(rng));
  }
  return out;
}

using ProgressFn = std::function<void(int epoch, double total)>;

// Full-batch pretraining: encode, reparameterize, decode, focal + beta KL,
// backward, Lion step. Throws RuntimeError on a non-finite loss.
template <typename Scalar>
std::vector<PretrainRecord> pretrain(VaeModel<Scalar>& model, const Matrix<Scalar>& x,
                                     const PretrainConfig& config,
                                     const ProgressFn& progress = {}) {
  config.schedule.validate();
  if (x.cols() != model.input_width()) {
    throw ValidationError("pretrain: data width does not match the model");
  }
  loss::FocalParams focal{config.focal_alpha ? *config.focal_alpha : loss::zero_fraction(x),
                          config.focal_gamma};
  focal.validate();
  auto& mc = model.mutable_config();
  mc.focal_alpha = focal.alpha;
  mc.focal_gamma = focal.gamma;
  mc.kl_beta = config.kl_beta;

  const auto beta = static_cast<Scalar>(config.kl_beta);
  const auto reparam = model.config().reparam;
  LionState<Scalar> lion{config.lion, {}, 0};
  const auto params = model.parameters();
  std::vector<PretrainRecord> history;
  history.reserve(static_cast<std::size_t>(config.schedule.epochs));
  model.set_mode(nn::Mode::kTrain);

  for (int epoch = 0; epoch < config.schedule.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.schedule);
    model.zero_grad();
    const auto enc = model.encode(x);
    const Matrix<Scalar> noise = epoch_noise<Scalar>(config.seed, static_cast<std::uint64_t>(epoch),
                                                     enc.mu.rows(), enc.mu.cols());
    const Matrix<Scalar> z = nn::reparameterize(enc.mu, enc.logsig, noise, reparam);
    const Matrix<Scalar> recon = model.decode(z);
    const auto fl = loss::focal_loss(recon, x, focal);
    const auto kl = loss::latent_kl(enc.mu, enc.logsig);
    const double total = static_cast<double>(fl.value + beta * kl.value);
    if (!std::isfinite(total)) {
      throw RuntimeError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
    }
    history.push_back({epoch, lr, static_cast<double>(fl.value), static_cast<double>(kl.value), total});

    const Matrix<Scalar> dz = model.decode_backward(fl.grad);
    auto [d_mu, d_logsig] = nn::reparameterize_backward(dz, enc.logsig, noise, reparam);
    d_mu += beta * kl.grad_mu;
    d_logsig += beta * kl.grad_logsig;
    model.encode_backward(d_mu, d_logsig);
    lion_step(params, lion, lr);
    if (progress) progress(epoch, total);
  }
  model.set_mode(nn::Mode::kEval);
  return history;
}

// Trainable decoder input for one tract.
template <typename Scalar>
struct LatentMatrix {
  Matrix<Scalar> values;
  std::uint64_t seed = 0;
  LionState<Scalar> optimizer;
};

template <typename Scalar>
LatentMatrix<Scalar> init_latent(std::size_t n_households, int width, std::uint64_t seed) {
  if (n_households == 0) throw ValidationError("init_latent: N_t must be >= 1");
  if (width < 1) throw ValidationError("init_latent: width must be >= 1");
  LatentMatrix<Scalar> out;
  out.seed = seed;
  out.values = epoch_noise<Scalar>(seed, 0, static_cast<Eigen::Index>(n_households), width);
  return out;
}

struct FinetuneConfig {
  Schedule schedule;
  LionConfig lion;
  double weight_marginal = 1.0;
  double weight_dbce = 1.0;
  double weight_norm_kl = 0.1;
  loss::DbceOptions dbce;
  // Microdata rows used as the D-BCE reference; 0 keeps all of them.
  std::size_t reference_size = 0;
  std::uint64_t seed = 0;
};

struct FinetuneRecord {
  int epoch;
  double lr;
  double marginal_rmse;
  double dbce;
  double norm_kl;
  double total;
};

template <typename Scalar>
struct FinetuneResult {
  std::vector<FinetuneRecord> history;
  // Soft marginals of the decoder output after the final update.
  Marginals final_soft;
  double final_dbce = 0;
  double final_norm_kl = 0;
  double final_marginal_rmse = 0;
};

// Seeded subset of rows (sorted) when `size` is below the row count.
template <typename Scalar>
Matrix<Scalar> reference_rows(const Matrix<Scalar>& x, std::size_t size, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (size == 0 || size >= n) return x;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x5eed));
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  Matrix<Scalar> out(static_cast<Eigen::Index>(size), x.cols());
  for (std::size_t i = 0; i < size; ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// Evaluates every fine-tuning term for the current latent without updating.
template <typename Scalar>
struct FinetuneTerms {
  Matrix<Scalar> generated;
  loss::MarginalLossResult<Scalar> marginal;
  loss::DbceResult<Scalar> dbce;
};

template <typename Scalar>
FinetuneTerms<Scalar> finetune_terms(VaeModel<Scalar>& model, const Matrix<Scalar>& z,
                                     const TargetMarginals& targets, const Layout& layout,
                                     const Matrix<Scalar>& reference,
                                     const loss::DbceOptions& options) {
  FinetuneTerms<Scalar> t;
  t.generated = model.decode(z);
  t.marginal = loss::marginal_rmse_loss(t.generated, targets, layout);
  t.dbce = loss::dbce(t.generated, reference, options);
  return t;
}

// Optimizes only the latent matrix through the frozen decoder (eval-mode
// batch norm). Decoder parameters and statistics are never written.
template <typename Scalar>
FinetuneResult<Scalar> finetune(VaeModel<Scalar>& model, LatentMatrix<Scalar>& latent,
                                const TargetMarginals& targets, const Layout& layout,
                                const Matrix<Scalar>& microdata, const FinetuneConfig& config,
                                const ProgressFn& progress = {}) {
  config.schedule.validate();
  if (layout.fingerprint() != model.fingerprint()) {
    throw ValidationError("finetune: schema fingerprint mismatch between model and data");
  }
  if (microdata.cols() != model.input_width()) {
    throw ValidationError("finetune: microdata width does not match the model");
  }
  if (latent.values.cols() != model.latent_dim()) {
    throw ValidationError("finetune: latent width does not match the decoder input");
  }
  if (static_cast<std::size_t>(latent.values.rows()) != targets.n_households) {
    throw ValidationError("finetune: latent rows must equal the tract household count");
  }
  const Matrix<Scalar> reference = reference_rows(microdata, config.reference_size, config.seed);
  model.set_mode(nn::Mode::kEval);
  latent.optimizer.config = config.lion;
  Matrix<Scalar> grad(latent.values.rows(), latent.values.cols());
  const std::vector<nn::ParamBlock<Scalar>> block{
      {latent.values.data(), grad.data(), latent.values.size()}};
  const auto wm = static_cast<Scalar>(config.weight_marginal);
  const auto wd = static_cast<Scalar>(config.weight_dbce);
  const auto wk = static_cast<Scalar>(config.weight_norm_kl);

  FinetuneResult<Scalar> result;
  result.history.reserve(static_cast<std::size_t>(config.schedule.epochs));
  for (int epoch = 0; epoch < config.schedule.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.schedule);
    auto t = finetune_terms(model, latent.values, targets, layout, reference, config.dbce);
    const double total = static_cast<double>(wm * t.marginal.value + wd * t.dbce.dbce_loss +
                                             wk * t.dbce.norm_kl);
    if (!std::isfinite(total)) {
      throw RuntimeError("finetune: non-finite loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back({epoch, lr, static_cast<double>(t.marginal.value),
                              static_cast<double>(t.dbce.dbce_loss),
                              static_cast<double>(t.dbce.norm_kl), total});
    const Matrix<Scalar> d_out = wm * t.marginal.grad + wd * t.dbce.grad_dbce + wk * t.dbce.grad_norm_kl;
    // Copy, not move: the optimizer block points at grad's storage.
    const Matrix<Scalar> dz = model.decode_backward(d_out, /*accumulate_params=*/false);
    grad = dz;
    lion_step(block, latent.optimizer, lr);
    if (progress) progress(epoch, total);
  }
  auto final_terms = finetune_terms(model, latent.values, targets, layout, reference, config.dbce);
  result.final_soft = std::move(final_terms.marginal.soft);
  result.final_dbce = static_cast<double>(final_terms.dbce.dbce_loss);
  result.final_norm_kl = static_cast<double>(final_terms.dbce.norm_kl);
  result.final_marginal_rmse = static_cast<double>(final_terms.marginal.value);
  return result;
}

// D-BCE of the model's reconstructions of `x` (eval mode, mean latent).
template <typename Scalar>
double reconstruction_dbce(VaeModel<Scalar>& model, const Matrix<Scalar>& x,
                           const Matrix<Scalar>& reference, const loss::DbceOptions& options) {
  model.set_mode(nn::Mode::kEval);
  const auto enc = model.encode(x);
  loss::DbceOptions o = options;
  o.gradients = false;
  return static_cast<double>(loss::dbce(model.decode(enc.mu), reference, o).dbce_loss);
}

// Latent file: magic "PSYNLAT\0" | u32 version | u32 scalar bytes |
// u64 rows | u64 cols | u64 seed | values row-major | u64 FNV-1a checksum.
template <typename Scalar>
void save_latent(const LatentMatrix<Scalar>& latent, const std::filesystem::path& path) {
  io::Writer w;
  w.raw("PSYNLAT", 8);
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(sizeof(Scalar));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(latent.values.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(latent.values.cols()));
  w.put<std::uint64_t>(latent.seed);
  for (Eigen::Index r = 0; r < latent.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < latent.values.cols(); ++c) w.put<Scalar>(latent.values(r, c));
  }
  w.put<std::uint64_t>(Fnv1a().update(w.buffer()).digest());
  io::write_file_atomic(path, w.buffer());
}

template <typename Scalar>
LatentMatrix<Scalar> load_latent(const std::filesystem::path& path) {
  io::Reader r(io::read_file(path), path.string());
  if (r.raw(8) != std::string("PSYNLAT", 8)) throw ValidationError(path.string() + ": not a latent file");
  if (r.get<std::uint32_t>() != 1) throw ValidationError(path.string() + ": unsupported version");
  if (r.get<std::uint32_t>() != sizeof(Scalar)) throw ValidationError(path.string() + ": scalar width mismatch");
  LatentMatrix<Scalar> out;
  const auto rows = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  const auto cols = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  out.seed = r.get<std::uint64_t>();
  out.values.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) out.values(i, c) = r.template get<Scalar>();
  }
  const std::size_t body = r.position();
  if (r.get<std::uint64_t>() != Fnv1a().update(std::string_view(r.data()).substr(0, body)).digest()) {
    throw ValidationError(path.string() + ": checksum mismatch");
  }
  return out;
}

// Loss histories as CSV: epoch, lr, then each loss component.
void write_history(const std::vector<PretrainRecord>& history, const std::filesystem::path& path);
void write_history(const std::vector<FinetuneRecord>& history, const std::filesystem::path& path);

}  // namespace popsynth::train

#endif  // POPSYNTH_TRAINING_HPP_
