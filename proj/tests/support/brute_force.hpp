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

// Straight double-loop reference implementations. They share no code with
// the library so the library's matrix formulations can be checked against
// them.

#ifndef POPSYNTH_TESTS_BRUTE_FORCE_HPP_
#define POPSYNTH_TESTS_BRUTE_FORCE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace popsynth::brute {

inline double clamp_p(double p) { return std::min(std::max(p, 1e-7), 1.0 - 1e-7); }

inline double row_bce(const Eigen::MatrixXd& pred, Eigen::Index i, const Eigen::MatrixXd& target, Eigen::Index j) {
  double s = 0;
  for (Eigen::Index k = 0; k < pred.cols(); ++k) {
    const double p = clamp_p(pred(i, k));
    const double x = target(j, k);
    s += x * std::log(p) + (1.0 - x) * std::log(1.0 - p);
  }
  return -s / static_cast<double>(pred.cols());
}

struct Dbce {
  double loss = 0;
  double norm_kl = 0;
  std::vector<double> soft_index;
};

inline Dbce dbce(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& micro, double tau, double eps) {
  const Eigen::Index nt = generated.rows();
  const Eigen::Index n = micro.rows();
  Dbce out;
  out.soft_index.assign(static_cast<std::size_t>(n), 0.0);
  double total = 0;
  for (Eigen::Index i = 0; i < nt; ++i) {
    std::vector<double> b(static_cast<std::size_t>(n));
    double lo = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      b[j] = row_bce(generated, i, micro, j);
      lo = std::min(lo, b[j]);
    }
    std::vector<double> w(b.size());
    double z = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      w[j] = std::exp(-(b[j] - lo) / tau);
      z += w[j];
    }
    double soft = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      w[j] /= z;
      soft += w[j] * b[j];
      out.soft_index[j] += w[j];
    }
    total += soft;
  }
  out.loss = total / static_cast<double>(nt);
  const double u = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < out.soft_index.size(); ++j) {
    const double q = out.soft_index[j] / static_cast<double>(nt);
    out.norm_kl += (u + eps) * std::log((u + eps) / (q + eps));
  }
  return out;
}

inline std::vector<double> dcr(const Eigen::MatrixXd& synthetic, const Eigen::MatrixXd& micro) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < synthetic.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < micro.rows(); ++j) best = std::min(best, row_bce(synthetic, i, micro, j));
    out.push_back(best);
  }
  return out;
}

}  // namespace popsynth::brute

#endif  // POPSYNTH_TESTS_BRUTE_FORCE_HPP_
