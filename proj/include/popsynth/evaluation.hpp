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

#ifndef POPSYNTH_EVALUATION_HPP_
#define POPSYNTH_EVALUATION_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "popsynth/marginals.hpp"
#include "popsynth/table.hpp"

namespace popsynth::eval {

inline constexpr double kDefaultEpsilon = 1e-6;

// sqrt(mean((a - b)^2)).
double rmse_metric(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// sum_i (s_i + eps) log((s_i + eps) / (r_i + eps)), synthetic first.
double kl_metric(const Eigen::VectorXd& synthetic, const Eigen::VectorXd& reference,
                 double epsilon = kDefaultEpsilon);

struct ChiSquareResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  // Categories folded into the tail bucket because their expected count
  // was below 5.
  int merged_categories = 0;
};

// Pearson goodness of fit of observed counts against expected proportions.
// Zero-proportion categories with zero observations are skipped; other zero
// proportions are raised to epsilon before renormalizing.
ChiSquareResult chi_square_test(const Eigen::VectorXd& observed, const Eigen::VectorXd& expected,
                                double epsilon = kDefaultEpsilon);

struct VariableMetrics {
  std::string name;
  double rmse = 0.0;
  double kl = 0.0;
  std::optional<double> baseline_rmse;
  std::optional<double> baseline_kl;
  double chi_square_p = 1.0;
};

struct MetricsReport {
  std::vector<VariableMetrics> variables;
  double mean_rmse = 0.0;
  double mean_kl = 0.0;
  std::optional<double> mean_baseline_rmse;
  std::optional<double> mean_baseline_kl;
};

// Scores `synthetic` against `reference` per variable. `synthetic_counts`
// feed the chi-square test; `baseline` (e.g. microdata marginals) is
// scored against the same reference when given.
MetricsReport marginal_metrics(const Schema& schema, const Marginals& synthetic,
                               const Marginals& synthetic_counts, const Marginals& reference,
                               const std::optional<Marginals>& baseline = std::nullopt,
                               double epsilon = kDefaultEpsilon);

// Lower-triangle matrices over all variable pairs, indexed [row][col] with
// row > col in schema order (household vars first).
struct JointPairReport {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rmse;
  std::vector<std::vector<double>> kl;
  std::vector<std::vector<double>> chi_square_p;
  std::size_t pair_count = 0;
};

// Joint category tables for every unordered variable pair. Pairs with a
// person variable are counted over persons (household values repeated per
// member); household pairs over households. `a` is scored against `b`.
JointPairReport joint_pair_metrics(const RestructuredTable& a, const RestructuredTable& b,
                                   double epsilon = kDefaultEpsilon);

// For each synthetic row, the minimum per-column-mean BCE against every
// microdata row, synthetic categories (clamped) acting as predictions.
Eigen::VectorXd dcr(const Eigen::MatrixXd& synthetic, const Eigen::MatrixXd& microdata);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value. With bins > 0
// the pooled range is split into equal-width bins and values are replaced by
// their bin index first.
KsResult ks_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int bins = 0);

struct DcrReport {
  Eigen::VectorXd household_a, household_b;
  Eigen::VectorXd person_a, person_b;
  KsResult household_ks;
  KsResult person_ks;
  int bins = 0;
};

// DCR of two inventories (e.g. pretrain vs fine-tune) against microdata at
// household and person level, plus K-S comparisons.
DcrReport dcr_report(const RestructuredTable& inventory_a, const RestructuredTable& inventory_b,
                     const RestructuredTable& microdata, int bins = 0);

// Report writers.
void write_metrics_table(const MetricsReport& report, const std::filesystem::path& path);
void write_joint_tables(const JointPairReport& report, const std::filesystem::path& rmse_path,
                        const std::filesystem::path& kl_path, const std::filesystem::path& p_path);
// Long-form marginals report: variable, category, microdata, synthetic, target.
void write_marginals_report(const Schema& schema, const Marginals& microdata,
                            const Marginals& synthetic, const std::optional<Marginals>& target,
                            const std::filesystem::path& path);
// One CSV per variable from a marginals report, columns in schema order.
std::vector<std::filesystem::path> emit_histograms(const std::filesystem::path& marginals_report,
                                                   const std::filesystem::path& out_dir);
void write_dcr_report(const DcrReport& report, const std::filesystem::path& distances_path,
                      const std::filesystem::path& histogram_path);

}  // namespace popsynth::eval

#endif  // POPSYNTH_EVALUATION_HPP_
