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

#ifndef POPSYNTH_VAE_HPP_
#define POPSYNTH_VAE_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "popsynth/common.hpp"
#include "popsynth/nn.hpp"
#include "popsynth/schema.hpp"

namespace popsynth {

inline constexpr int kBlocksPerSide = 6;

struct VaeConfig {
  int latent_dim = 64;
  // Output width of each encoder block; the decoder mirrors it by default.
  std::vector<int> encoder_widths{512, 384, 256, 192, 128, 96};
  std::vector<int> decoder_widths{96, 128, 192, 256, 384, 512};
  nn::ReparamMode reparam = nn::ReparamMode::kLiteral;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
  // Loss settings recorded with the model.
  double focal_alpha = 0.5;
  double focal_gamma = 2.0;
  double kl_beta = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (latent_dim < 1) throw ValidationError("vae: latent_dim must be >= 1");
    if (encoder_widths.size() != kBlocksPerSide || decoder_widths.size() != kBlocksPerSide) {
      throw ValidationError("vae: hidden widths need exactly 6 entries per side");
    }
    for (int w : encoder_widths) {
      if (w < 1) throw ValidationError("vae: hidden widths must be positive");
    }
    for (int w : decoder_widths) {
      if (w < 1) throw ValidationError("vae: hidden widths must be positive");
    }
  }
};

template <typename Scalar>
struct EncoderOutput {
  nn::Matrix<Scalar> mu;
  nn::Matrix<Scalar> logsig;
};

// Six Affine+BN+ReLU blocks per side, mu/logsig heads (Affine+BN), and an
// Affine + group-softmax output head of width D.
template <typename Scalar>
class VaeModel {
 public:
  VaeModel(const Layout& layout, VaeConfig config)
      : config_(std::move(config)),
        fingerprint_(layout.fingerprint()),
        n_window_(layout.n_window()),
        input_width_(layout.width()) {
    config_.validate();
    for (const auto& g : layout.groups()) groups_.push_back({g.start, g.width});
    build();
  }

  // Re-draws every weight from the seed.
  void initialize(std::uint64_t seed) {
    config_.seed = seed;
    std::mt19937_64 rng(seed);
    for (auto* seq : {&encoder_, &mu_head_, &logsig_head_, &decoder_}) {
      for (auto& layer : seq->layers()) {
        if (auto* a = std::get_if<nn::Affine<Scalar>>(&layer)) a->init(rng);
      }
    }
  }

  void set_mode(nn::Mode mode) { mode_ = mode; }
  nn::Mode mode() const { return mode_; }

  EncoderOutput<Scalar> encode(const nn::Matrix<Scalar>& x) {
    nn::require_shape(x.cols() == input_width_, "vae encode: batch width " +
                                                    std::to_string(x.cols()) + " != D " +
                                                    std::to_string(input_width_));
    const nn::Matrix<Scalar> h = encoder_.forward(x, mode_);
    return {mu_head_.forward(h, mode_), logsig_head_.forward(h, mode_)};
  }

  // Returns dL/dx given gradients on both heads.
  nn::Matrix<Scalar> encode_backward(const nn::Matrix<Scalar>& d_mu,
                                     const nn::Matrix<Scalar>& d_logsig) {
    nn::Matrix<Scalar> dh = mu_head_.backward(d_mu);
    dh += logsig_head_.backward(d_logsig);
    return encoder_.backward(dh);
  }

  nn::Matrix<Scalar> decode(const nn::Matrix<Scalar>& z) {
    nn::require_shape(z.cols() == config_.latent_dim,
                      "vae decode: latent width " + std::to_string(z.cols()) +
                          " != " + std::to_string(config_.latent_dim));
    return decoder_.forward(z, mode_);
  }

  nn::Matrix<Scalar> decode_backward(const nn::Matrix<Scalar>& dx, bool accumulate_params = true) {
    return decoder_.backward(dx, accumulate_params);
  }

  std::vector<nn::ParamBlock<Scalar>> parameters() {
    std::vector<nn::ParamBlock<Scalar>> out;
    for (auto* seq : {&encoder_, &mu_head_, &logsig_head_, &decoder_}) seq->collect(out);
    return out;
  }
  void zero_grad() {
    for (auto* seq : {&encoder_, &mu_head_, &logsig_head_, &decoder_}) seq->zero_grad();
  }

  // Hash over every decoder parameter and running statistic.
  std::uint64_t decoder_checksum() const {
    Fnv1a h;
    visit_state(decoder_, [&](const Scalar* data, Eigen::Index n) {
      h.update(data, sizeof(Scalar) * static_cast<std::size_t>(n));
    });
    return h.digest();
  }
  // Hash over the full model state.
  std::uint64_t checksum() const {
    Fnv1a h;
    for (const auto* seq : {&encoder_, &mu_head_, &logsig_head_, &decoder_}) {
      visit_state(*seq, [&](const Scalar* data, Eigen::Index n) {
        h.update(data, sizeof(Scalar) * static_cast<std::size_t>(n));
      });
    }
    return h.digest();
  }

  const VaeConfig& config() const { return config_; }
  VaeConfig& mutable_config() { return config_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  int n_window() const { return n_window_; }
  Eigen::Index input_width() const { return input_width_; }
  int latent_dim() const { return config_.latent_dim; }

  nn::Sequential<Scalar>& encoder() { return encoder_; }
  nn::Sequential<Scalar>& decoder() { return decoder_; }
  nn::Sequential<Scalar>& mu_head() { return mu_head_; }
  nn::Sequential<Scalar>& logsig_head() { return logsig_head_; }

  // Visits every stored array (parameters and running statistics) in the
  // fixed persistence order: per layer, Affine weights (row-major) then bias;
  // BatchNorm scale, shift, running mean, running variance.
  template <typename Seq, typename Fn>
  static void visit_state(Seq& seq, Fn&& fn) {
    for (auto& layer : seq.layers()) {
      std::visit(
          [&](auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, nn::Affine<Scalar>>) {
              const nn::Matrix<Scalar> wt = l.weights().transpose();  // row-major order
              fn(wt.data(), wt.size());
              fn(l.bias().data(), l.bias().size());
            } else if constexpr (std::is_same_v<L, nn::BatchNorm<Scalar>>) {
              fn(l.scale().data(), l.scale().size());
              fn(l.shift().data(), l.shift().size());
              fn(l.running_mean().data(), l.running_mean().size());
              fn(l.running_var().data(), l.running_var().size());
            }
          },
          layer);
    }
  }

  template <typename Fn>
  void visit_all(Fn&& fn) const {
    for (const auto* seq : {&encoder_, &mu_head_, &logsig_head_, &decoder_}) visit_state(*seq, fn);
  }

  // Mutable counterpart used by load_model; Affine weights are read
  // row-major.
  template <typename Fn>
  void load_all(Fn&& read) {
    for (auto* seq : {&encoder_, &mu_head_, &logsig_head_, &decoder_}) {
      for (auto& layer : seq->layers()) {
        std::visit(
            [&](auto& l) {
              using L = std::decay_t<decltype(l)>;
              if constexpr (std::is_same_v<L, nn::Affine<Scalar>>) {
                nn::Matrix<Scalar> wt(l.weights().cols(), l.weights().rows());
                read(wt.data(), wt.size());
                l.weights() = wt.transpose();
                read(l.bias().data(), l.bias().size());
              } else if constexpr (std::is_same_v<L, nn::BatchNorm<Scalar>>) {
                read(l.scale().data(), l.scale().size());
                read(l.shift().data(), l.shift().size());
                read(l.running_mean().data(), l.running_mean().size());
                read(l.running_var().data(), l.running_var().size());
              }
            },
            layer);
      }
    }
  }

 private:
  void add_block(nn::Sequential<Scalar>& seq, Eigen::Index in, Eigen::Index out, bool relu) {
    seq.add(nn::Affine<Scalar>(in, out));
    seq.add(nn::BatchNorm<Scalar>(out, config_.bn_epsilon, config_.bn_momentum));
    if (relu) seq.add(nn::Relu<Scalar>());
  }

  void build() {
    Eigen::Index width = input_width_;
    for (int w : config_.encoder_widths) {
      add_block(encoder_, width, w, true);
      width = w;
    }
    add_block(mu_head_, width, config_.latent_dim, false);
    add_block(logsig_head_, width, config_.latent_dim, false);
    width = config_.latent_dim;
    for (int w : config_.decoder_widths) {
      add_block(decoder_, width, w, true);
      width = w;
    }
    decoder_.add(nn::Affine<Scalar>(width, input_width_));
    decoder_.add(nn::GroupSoftmax<Scalar>(groups_));
    initialize(config_.seed);
  }

  VaeConfig config_;
  std::uint64_t fingerprint_;
  int n_window_;
  Eigen::Index input_width_;
  std::vector<nn::Span> groups_;
  nn::Mode mode_ = nn::Mode::kTrain;
  nn::Sequential<Scalar> encoder_, mu_head_, logsig_head_, decoder_;
};

template <typename Scalar>
VaeModel<Scalar> init_model(const Layout& layout, VaeConfig config, std::uint64_t seed) {
  config.seed = seed;
  return VaeModel<Scalar>(layout, std::move(config));
}

// ---------------------------------------------------------------------------
// Model file (all integers and floats little-endian):
//   magic "PSYNVAE\0" | u32 version | u32 scalar bytes (4 or 8)
//   u64 layout fingerprint | u32 n_window | u64 D | u32 latent_dim
//   u32 6 | 6 x u32 encoder widths | u32 6 | 6 x u32 decoder widths
//   u32 reparam mode | f64 bn eps | f64 bn momentum | f64 focal alpha
//   f64 focal gamma | f64 kl beta | u64 seed
//   u64 value count | values in VaeModel::visit_state order
//   u64 FNV-1a checksum of every preceding byte
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kModelMagic{'P', 'S', 'Y', 'N', 'V', 'A', 'E', '\0'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace io {

class Writer {
 public:
  template <typename T>
  void put(T value) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    buffer_.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }
  void raw(const char* data, std::size_t n) { buffer_.append(data, n); }
  const std::string& buffer() const { return buffer_; }

 private:
  std::string buffer_;
};

class Reader {
 public:
  Reader(std::string data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const { return pos_; }
  std::size_t size() const { return data_.size(); }
  const std::string& data() const { return data_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw ValidationError(source_ + ": truncated file");
  }
  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace io

template <typename Scalar>
void save_model(const VaeModel<Scalar>& model, const std::filesystem::path& path) {
  static_assert(sizeof(Scalar) == 4 || sizeof(Scalar) == 8);
  io::Writer w;
  w.raw(kModelMagic.data(), kModelMagic.size());
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint32_t>(sizeof(Scalar));
  w.put<std::uint64_t>(model.fingerprint());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.n_window()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.input_width()));
  const auto& c = model.config();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.latent_dim));
  w.put<std::uint32_t>(kBlocksPerSide);
  for (int v : c.encoder_widths) w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  w.put<std::uint32_t>(kBlocksPerSide);
  for (int v : c.decoder_widths) w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.reparam));
  w.put<double>(c.bn_epsilon);
  w.put<double>(c.bn_momentum);
  w.put<double>(c.focal_alpha);
  w.put<double>(c.focal_gamma);
  w.put<double>(c.kl_beta);
  w.put<std::uint64_t>(c.seed);
  std::uint64_t count = 0;
  model.visit_all([&](const Scalar*, Eigen::Index n) { count += static_cast<std::uint64_t>(n); });
  w.put<std::uint64_t>(count);
  model.visit_all([&](const Scalar* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) w.put<Scalar>(data[i]);
  });
  const std::uint64_t sum = Fnv1a().update(w.buffer()).digest();
  w.put<std::uint64_t>(sum);
  io::write_file_atomic(path, w.buffer());
}

// Loads a model. When `expected` is given, its fingerprint must match the
// model's (same schema and window).
template <typename Scalar>
VaeModel<Scalar> load_model(const std::filesystem::path& path, const Layout& layout) {
  io::Reader r(io::read_file(path), path.string());
  const std::string magic = r.raw(kModelMagic.size());
  if (std::memcmp(magic.data(), kModelMagic.data(), kModelMagic.size()) != 0) {
    throw ValidationError(path.string() + ": not a model file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw ValidationError(path.string() + ": unsupported model version " + std::to_string(version));
  }
  if (r.get<std::uint32_t>() != sizeof(Scalar)) {
    throw ValidationError(path.string() + ": scalar width does not match");
  }
  const auto fingerprint = r.get<std::uint64_t>();
  const auto n_window = r.get<std::uint32_t>();
  const auto width = r.get<std::uint64_t>();
  if (fingerprint != layout.fingerprint() || n_window != static_cast<std::uint32_t>(layout.n_window()) ||
      width != static_cast<std::uint64_t>(layout.width())) {
    throw ValidationError(path.string() + ": schema fingerprint mismatch (model " +
                          to_hex(fingerprint) + ", data " + to_hex(layout.fingerprint()) + ")");
  }
  VaeConfig c;
  c.latent_dim = static_cast<int>(r.get<std::uint32_t>());
  auto widths = [&](std::vector<int>& out) {
    const auto n = r.get<std::uint32_t>();
    if (n != kBlocksPerSide) throw ValidationError(path.string() + ": bad block count");
    out.clear();
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(static_cast<int>(r.get<std::uint32_t>()));
  };
  widths(c.encoder_widths);
  widths(c.decoder_widths);
  const auto reparam = r.get<std::uint32_t>();
  if (reparam > 1) throw ValidationError(path.string() + ": bad reparameterization mode");
  c.reparam = static_cast<nn::ReparamMode>(reparam);
  c.bn_epsilon = r.get<double>();
  c.bn_momentum = r.get<double>();
  c.focal_alpha = r.get<double>();
  c.focal_gamma = r.get<double>();
  c.kl_beta = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  VaeModel<Scalar> model(layout, c);
  const auto count = r.get<std::uint64_t>();
  std::uint64_t expected = 0;
  model.visit_all([&](const Scalar*, Eigen::Index n) { expected += static_cast<std::uint64_t>(n); });
  if (count != expected) throw ValidationError(path.string() + ": parameter count mismatch");
  model.load_all([&](Scalar* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) data[i] = r.template get<Scalar>();
  });
  const std::size_t body = r.position();
  const auto sum = r.get<std::uint64_t>();
  if (sum != Fnv1a().update(std::string_view(r.data()).substr(0, body)).digest()) {
    throw ValidationError(path.string() + ": checksum mismatch");
  }
  if (r.position() != r.size()) throw ValidationError(path.string() + ": trailing bytes");
  model.set_mode(nn::Mode::kEval);
  return model;
}

// Reads only the header's window size (needed to build the layout of a
// model trained with an observed-maximum window).
int peek_model_window(const std::filesystem::path& path);

}  // namespace popsynth

#endif  // POPSYNTH_VAE_HPP_
