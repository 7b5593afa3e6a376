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

#include "popsynth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "popsynth/common.hpp"
#include "popsynth/csv.hpp"
#include "popsynth/encoding.hpp"
#include "popsynth/losses.hpp"

namespace popsynth::eval {
namespace {

void require_same_length(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size()) {
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
}

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum) || std::abs(term) < 1e-300) {
      return std::clamp(2.0 * sum, 0.0, 1.0);
    }
    sign = -sign;
  }
  // Series did not converge (tiny lambda): the distributions are identical.
  return 1.0;
}

struct PairTable {
  Eigen::VectorXd counts;
  double total = 0.0;
};

// Category count of variable v in marginal order (person vars without NA).
int marginal_size(const Schema& s, std::size_t v) {
  const auto& var = marginal_variable(s, v);
  return v < s.household_vars.size() ? var.size() : var.size() - 1;
}

PairTable joint_counts(const RestructuredTable& t, std::size_t u, std::size_t v) {
  const Schema& s = *t.schema;
  const std::size_t nh = s.household_vars.size();
  const int ku = marginal_size(s, u);
  const int kv = marginal_size(s, v);
  PairTable out{Eigen::VectorXd::Zero(ku * kv), 0.0};
  if (u < nh && v < nh) {
    for (const auto& row : t.rows) {
      out.counts(row.household[u] * kv + row.household[v]) += 1.0;
      out.total += 1.0;
    }
    return out;
  }
  const int anchor = s.anchor_index();
  const int na = s.na_index(anchor);
  for (const auto& row : t.rows) {
    for (const auto& slot : row.slots) {
      if (slot[anchor] == na) continue;
      const int a = u < nh ? row.household[u] : slot[u - nh];
      const int b = v < nh ? row.household[v] : slot[v - nh];
      if (a >= ku || b >= kv) continue;  // NA on a person variable
      out.counts(a * kv + b) += 1.0;
      out.total += 1.0;
    }
  }
  return out;
}

}  // namespace

double rmse_metric(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require_same_length(a, b, "rmse_metric");
  if (a.size() == 0) return 0.0;
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double kl_metric(const Eigen::VectorXd& synthetic, const Eigen::VectorXd& reference, double epsilon) {
  require_same_length(synthetic, reference, "kl_metric");
  if (!(epsilon > 0)) throw ValidationError("kl_metric: epsilon must be positive");
  return loss::smoothed_kl<double>(synthetic, reference, epsilon);
}

ChiSquareResult chi_square_test(const Eigen::VectorXd& observed, const Eigen::VectorXd& expected,
                                double epsilon) {
  require_same_length(observed, expected, "chi_square_test");
  const double total = observed.sum();
  if (!(total > 0)) throw ValidationError("chi_square_test: all observations are zero");
  if ((expected.array() < 0).any() || (observed.array() < 0).any()) {
    throw ValidationError("chi_square_test: negative input");
  }
  std::vector<double> obs, prop;
  bool smoothed = false;
  for (Eigen::Index i = 0; i < observed.size(); ++i) {
    if (expected(i) <= 0 && observed(i) <= 0) continue;
    obs.push_back(observed(i));
    if (expected(i) <= 0) {
      prop.push_back(epsilon);
      smoothed = true;
    } else {
      prop.push_back(expected(i));
    }
  }
  double psum = 0;
  for (double p : prop) psum += p;
  if (!(psum > 0)) throw ValidationError("chi_square_test: expected proportions are all zero");

  struct Bucket {
    double o = 0, e = 0;
  };
  std::vector<Bucket> buckets;
  Bucket tail;
  int tail_size = 0;
  bool exact = !smoothed;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double e = prop[i] / psum * total;
    if (std::abs(obs[i] - e) > 1e-9 * std::max(1.0, e)) exact = false;
    if (e >= 5.0) {
      buckets.push_back({obs[i], e});
    } else {
      tail.o += obs[i];
      tail.e += e;
      ++tail_size;
    }
  }
  ChiSquareResult r;
  r.merged_categories = tail_size;
  if (tail_size > 0) {
    if (tail.e < 5.0 && !buckets.empty()) {
      auto smallest = std::min_element(buckets.begin(), buckets.end(),
                                       [](const Bucket& a, const Bucket& b) { return a.e < b.e; });
      smallest->o += tail.o;
      smallest->e += tail.e;
    } else {
      buckets.push_back(tail);
    }
  }
  r.degrees_of_freedom = static_cast<int>(buckets.size()) - 1;
  if (exact || r.degrees_of_freedom < 1) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  for (const auto& b : buckets) r.statistic += (b.o - b.e) * (b.o - b.e) / b.e;
  boost::math::chi_squared_distribution<double> dist(r.degrees_of_freedom);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

MetricsReport marginal_metrics(const Schema& schema, const Marginals& synthetic,
                               const Marginals& synthetic_counts, const Marginals& reference,
                               const std::optional<Marginals>& baseline, double epsilon) {
  MetricsReport report;
  const std::size_t n = synthetic.variable_count();
  if (reference.variable_count() != n || synthetic_counts.variable_count() != n ||
      (baseline && baseline->variable_count() != n)) {
    throw ValidationError("marginal_metrics: marginals cover different variables");
  }
  double sum_rmse = 0, sum_kl = 0, sum_brmse = 0, sum_bkl = 0;
  for (std::size_t v = 0; v < n; ++v) {
    VariableMetrics m;
    m.name = marginal_variable(schema, v).name;
    m.rmse = rmse_metric(synthetic.variable(v), reference.variable(v));
    m.kl = kl_metric(synthetic.variable(v), reference.variable(v), epsilon);
    if (baseline) {
      m.baseline_rmse = rmse_metric(baseline->variable(v), reference.variable(v));
      m.baseline_kl = kl_metric(baseline->variable(v), reference.variable(v), epsilon);
      sum_brmse += *m.baseline_rmse;
      sum_bkl += *m.baseline_kl;
    }
    m.chi_square_p = chi_square_test(synthetic_counts.variable(v), reference.variable(v), epsilon).p_value;
    sum_rmse += m.rmse;
    sum_kl += m.kl;
    report.variables.push_back(std::move(m));
  }
  const double dn = static_cast<double>(n);
  report.mean_rmse = sum_rmse / dn;
  report.mean_kl = sum_kl / dn;
  if (baseline) {
    report.mean_baseline_rmse = sum_brmse / dn;
    report.mean_baseline_kl = sum_bkl / dn;
  }
  return report;
}

JointPairReport joint_pair_metrics(const RestructuredTable& a, const RestructuredTable& b, double epsilon) {
  if (a.rows.empty() || b.rows.empty()) throw ValidationError("joint_pair_metrics: empty table");
  if (a.schema->fingerprint() != b.schema->fingerprint()) {
    throw ValidationError("joint_pair_metrics: tables use different schemas");
  }
  const Schema& s = *a.schema;
  const std::size_t n = s.household_vars.size() + s.person_vars.size();
  JointPairReport r;
  for (std::size_t v = 0; v < n; ++v) r.names.push_back(marginal_variable(s, v).name);
  r.rmse.assign(n, std::vector<double>(n, 0.0));
  r.kl.assign(n, std::vector<double>(n, 0.0));
  r.chi_square_p.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t row = 1; row < n; ++row) {
    for (std::size_t col = 0; col < row; ++col) {
      const PairTable ta = joint_counts(a, col, row);
      const PairTable tb = joint_counts(b, col, row);
      if (ta.total <= 0 || tb.total <= 0) throw ValidationError("joint_pair_metrics: no records for a pair");
      const Eigen::VectorXd pa = ta.counts / ta.total;
      const Eigen::VectorXd pb = tb.counts / tb.total;
      r.rmse[row][col] = rmse_metric(pa, pb);
      r.kl[row][col] = kl_metric(pa, pb, epsilon);
      r.chi_square_p[row][col] = chi_square_test(ta.counts, pb, epsilon).p_value;
      ++r.pair_count;
    }
  }
  return r;
}

Eigen::VectorXd dcr(const Eigen::MatrixXd& synthetic, const Eigen::MatrixXd& microdata) {
  if (microdata.rows() == 0) throw ValidationError("dcr: empty microdata");
  if (synthetic.cols() != microdata.cols()) throw ValidationError("dcr: width mismatch");
  Eigen::VectorXd out(synthetic.rows());
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index start = 0; start < synthetic.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, synthetic.rows() - start);
    const Eigen::MatrixXd block = synthetic.middleRows(start, len);
    const Eigen::MatrixXd bce = loss::pairwise_bce<double>(block, microdata);
    out.segment(start, len) = bce.rowwise().minCoeff();
  }
  return out;
}

KsResult ks_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int bins) {
  if (a.size() == 0 || b.size() == 0) throw ValidationError("ks_test: empty sample");
  std::vector<double> x(a.data(), a.data() + a.size());
  std::vector<double> y(b.data(), b.data() + b.size());
  if (bins > 0) {
    const double lo = std::min(a.minCoeff(), b.minCoeff());
    const double hi = std::max(a.maxCoeff(), b.maxCoeff());
    const double width = (hi - lo) / bins;
    auto to_bin = [&](double v) {
      if (!(width > 0)) return 0.0;
      return std::min<double>(bins - 1, std::floor((v - lo) / width));
    };
    for (auto& v : x) v = to_bin(v);
    for (auto& v : y) v = to_bin(v);
  }
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.statistic = d;
  if (d == 0.0) return r;
  const double ne = std::sqrt(n * m / (n + m));
  r.p_value = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
  return r;
}

DcrReport dcr_report(const RestructuredTable& inventory_a, const RestructuredTable& inventory_b,
                     const RestructuredTable& microdata, int bins) {
  const auto fa = inventory_a.layout().fingerprint();
  if (fa != microdata.layout().fingerprint() || fa != inventory_b.layout().fingerprint()) {
    throw ValidationError("dcr: inventories and microdata must share schema and window");
  }
  DcrReport r;
  r.bins = bins;
  const Eigen::MatrixXd micro_h = encode_onehot(microdata).values;
  r.household_a = dcr(encode_onehot(inventory_a).values, micro_h);
  r.household_b = dcr(encode_onehot(inventory_b).values, micro_h);
  const Eigen::MatrixXd micro_p = encode_person_rows(microdata);
  r.person_a = dcr(encode_person_rows(inventory_a), micro_p);
  r.person_b = dcr(encode_person_rows(inventory_b), micro_p);
  r.household_ks = ks_test(r.household_a, r.household_b, bins);
  r.person_ks = ks_test(r.person_a, r.person_b, bins);
  return r;
}

void write_metrics_table(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  std::vector<std::string> header{"metric"};
  for (const auto& v : report.variables) header.push_back(v.name);
  header.emplace_back("Mean");
  csv::write_row(out, header);
  auto emit = [&](const std::string& label, auto get, double mean) {
    std::vector<std::string> row{label};
    for (const auto& v : report.variables) row.push_back(csv::format_double(get(v)));
    row.push_back(csv::format_double(mean));
    csv::write_row(out, row);
  };
  if (report.mean_baseline_rmse) {
    emit("RMSE Baseline", [](const VariableMetrics& v) { return *v.baseline_rmse; }, *report.mean_baseline_rmse);
  }
  emit("RMSE", [](const VariableMetrics& v) { return v.rmse; }, report.mean_rmse);
  if (report.mean_baseline_kl) {
    emit("KL Baseline", [](const VariableMetrics& v) { return *v.baseline_kl; }, *report.mean_baseline_kl);
  }
  emit("KL", [](const VariableMetrics& v) { return v.kl; }, report.mean_kl);
  double mean_p = 0;
  for (const auto& v : report.variables) mean_p += v.chi_square_p;
  mean_p /= static_cast<double>(std::max<std::size_t>(1, report.variables.size()));
  emit("Chi-square p", [](const VariableMetrics& v) { return v.chi_square_p; }, mean_p);
}

void write_joint_tables(const JointPairReport& report, const std::filesystem::path& rmse_path,
                        const std::filesystem::path& kl_path, const std::filesystem::path& p_path) {
  auto write = [&](const std::vector<std::vector<double>>& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    std::vector<std::string> header{""};
    header.insert(header.end(), report.names.begin(), report.names.end());
    csv::write_row(out, header);
    for (std::size_t r = 0; r < report.names.size(); ++r) {
      std::vector<std::string> row{report.names[r]};
      for (std::size_t c = 0; c < report.names.size(); ++c) {
        row.push_back(c < r ? csv::format_double(m[r][c]) : (c == r ? "------" : ""));
      }
      csv::write_row(out, row);
    }
  };
  write(report.rmse, rmse_path);
  write(report.kl, kl_path);
  write(report.chi_square_p, p_path);
}

void write_marginals_report(const Schema& schema, const Marginals& microdata, const Marginals& synthetic,
                            const std::optional<Marginals>& target, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  csv::write_row(out, {"variable", "category", "microdata", "synthetic", "target"});
  for (std::size_t v = 0; v < synthetic.variable_count(); ++v) {
    const auto& var = marginal_variable(schema, v);
    for (Eigen::Index c = 0; c < synthetic.variable(v).size(); ++c) {
      csv::write_row(out, {var.name, var.categories[static_cast<std::size_t>(c)],
                           csv::format_double(microdata.variable(v)(c)),
                           csv::format_double(synthetic.variable(v)(c)),
                           target ? csv::format_double(target->variable(v)(c)) : ""});
    }
  }
}

std::vector<std::filesystem::path> emit_histograms(const std::filesystem::path& marginals_report,
                                                   const std::filesystem::path& out_dir) {
  if (!std::filesystem::exists(marginals_report)) {
    throw ValidationError("missing report " + marginals_report.string());
  }
  const auto t = csv::read(marginals_report);
  const std::string src = marginals_report.string();
  const int cv = t.require_column("variable", src);
  const int cc = t.require_column("category", src);
  const int cm = t.require_column("microdata", src);
  const int cs = t.require_column("synthetic", src);
  const int ct = t.require_column("target", src);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<std::string>>> rows;
  for (const auto& row : t.rows) {
    if (!rows.count(row[cv])) order.push_back(row[cv]);
    rows[row[cv]].push_back({row[cc], row[cm], row[cs], row[ct]});
  }
  for (const auto& name : order) {
    const auto path = out_dir / (name + ".csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    csv::write_row(out, {"category", "microdata", "synthetic", "target"});
    for (const auto& r : rows[name]) csv::write_row(out, r);
    written.push_back(path);
  }
  return written;
}

void write_dcr_report(const DcrReport& report, const std::filesystem::path& distances_path,
                      const std::filesystem::path& histogram_path) {
  {
    std::ofstream out(distances_path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + distances_path.string());
    csv::write_row(out, {"level", "inventory", "index", "dcr"});
    auto dump = [&](const char* level, const char* inv, const Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        csv::write_row(out, {level, inv, std::to_string(i), csv::format_double(v(i))});
      }
    };
    dump("household", "a", report.household_a);
    dump("household", "b", report.household_b);
    dump("person", "a", report.person_a);
    dump("person", "b", report.person_b);
  }
  std::ofstream out(histogram_path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + histogram_path.string());
  csv::write_row(out, {"level", "bin_low", "bin_high", "count_a", "count_b"});
  const int bins = report.bins > 0 ? report.bins : 20;
  auto hist = [&](const char* level, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double lo = std::min(a.minCoeff(), b.minCoeff());
    const double hi = std::max(a.maxCoeff(), b.maxCoeff());
    const double width = hi > lo ? (hi - lo) / bins : 1.0;
    std::vector<std::size_t> ca(static_cast<std::size_t>(bins), 0), cb(static_cast<std::size_t>(bins), 0);
    auto idx = [&](double v) {
      return static_cast<std::size_t>(std::min<double>(bins - 1, std::floor((v - lo) / width)));
    };
    for (Eigen::Index i = 0; i < a.size(); ++i) ++ca[idx(a(i))];
    for (Eigen::Index i = 0; i < b.size(); ++i) ++cb[idx(b(i))];
    for (int k = 0; k < bins; ++k) {
      csv::write_row(out, {level, csv::format_double(lo + k * width), csv::format_double(lo + (k + 1) * width),
                           std::to_string(ca[static_cast<std::size_t>(k)]),
                           std::to_string(cb[static_cast<std::size_t>(k)])});
    }
  };
  hist("household", report.household_a, report.household_b);
  hist("person", report.person_a, report.person_b);
}

}  // namespace popsynth::eval
