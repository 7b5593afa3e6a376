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

// popsynth command-line front end. One subcommand per invocation; every
// subcommand writes a JSON run manifest into the report directory.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "popsynth/common.hpp"
#include "popsynth/encoding.hpp"
#include "popsynth/evaluation.hpp"
#include "popsynth/generation.hpp"
#include "popsynth/marginals.hpp"
#include "popsynth/oracle.hpp"
#include "popsynth/schema.hpp"
#include "popsynth/table.hpp"
#include "popsynth/training.hpp"
#include "popsynth/vae.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace popsynth {
namespace {

using Clock = std::chrono::steady_clock;

class Run {
 public:
  Run(std::string name, const CLI::App* sub) : name_(std::move(name)), sub_(sub), start_(Clock::now()) {}

  void stage(const std::string& label) {
    const auto now = Clock::now();
    timings_[label] = std::chrono::duration<double>(now - mark_.value_or(start_)).count();
    mark_ = now;
  }
  void output(const fs::path& path) { outputs_.push_back(path); }
  json& extra() { return extra_; }

  void finish(const fs::path& report_dir) {
    json m;
    m["subcommand"] = name_;
    m["version"] = std::string(kVersion);
    json config = json::object();
    for (const CLI::Option* opt : sub_->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
      const auto& r = opt->results();
      const std::string key = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
      if (!r.empty()) {
        config[key] = r.size() == 1 ? json(r.front()) : json(r);
      } else if (!opt->get_default_str().empty()) {
        config[key] = opt->get_default_str();
      }
    }
    m["config"] = config;
    for (auto& [k, v] : extra_.items()) m[k] = v;
    timings_["total"] = std::chrono::duration<double>(Clock::now() - start_).count();
    m["timings_seconds"] = timings_;
    json outs = json::array();
    for (const auto& p : outputs_) {
      outs.push_back({{"path", p.string()},
                      {"fnv1a", to_hex(Fnv1a().update(io::read_file(p)).digest())}});
    }
    m["outputs"] = outs;
    fs::create_directories(report_dir);
    io::write_file_atomic(report_dir / (name_ + "_manifest.json"), m.dump(2) + "\n");
  }

 private:
  std::string name_;
  const CLI::App* sub_;
  Clock::time_point start_;
  std::optional<Clock::time_point> mark_;
  std::map<std::string, double> timings_;
  std::vector<fs::path> outputs_;
  json extra_ = json::object();
};

// Flag first, then POPSYNTH_REPORT_DIR, then ./reports.
fs::path resolve_report_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("POPSYNTH_REPORT_DIR"); env && *env) return env;
  return "reports";
}

std::shared_ptr<const Schema> read_schema(const std::string& path) {
  return std::make_shared<const Schema>(load_schema(path));
}

std::vector<HouseholdRecord> read_records(const std::string& hh, const std::string& p, const Schema& schema) {
  Microdata m = load_microdata(hh, p, schema);
  for (const auto& w : m.warnings) std::cerr << "popsynth: warning: " << w << "\n";
  return std::move(m.households);
}

int max_size(const std::vector<HouseholdRecord>& records) {
  int n = 1;
  for (const auto& r : records) n = std::max(n, static_cast<int>(r.persons.size()));
  return n;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

train::ProgressFn progress_every(int every, const char* label) {
  if (every <= 0) return {};
  return [every, label](int epoch, double total) {
    if ((epoch + 1) % every == 0) {
      std::cerr << label << " epoch " << epoch + 1 << " loss " << total << "\n";
    }
  };
}

struct ScheduleFlags {
  int epochs = 4000;
  double lr = 1e-3;
  double min_lr = 1e-4;
  int decay_start = 1000;
  double beta1 = 0.9, beta2 = 0.99, weight_decay = 0.0;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Initial learning rate")->capture_default_str();
    app->add_option("--min-lr", min_lr, "Final learning rate")->capture_default_str();
    app->add_option("--decay-start", decay_start, "Epoch where exponential decay begins")->capture_default_str();
    app->add_option("--lion-beta1", beta1)->capture_default_str();
    app->add_option("--lion-beta2", beta2)->capture_default_str();
    app->add_option("--weight-decay", weight_decay)->capture_default_str();
  }
  train::Schedule schedule() const {
    train::Schedule s{lr, epochs, std::min(decay_start, epochs), min_lr};
    s.validate();
    return s;
  }
  train::LionConfig lion() const { return {beta1, beta2, weight_decay}; }
};

// ---------------------------------------------------------------------------

struct RestructureCmd {
  std::string schema, hh, p, out;
  std::optional<int> n_window;

  void run(Run& run) const {
    auto s = read_schema(schema);
    const auto table = restructure(read_records(hh, p, *s), s, n_window);
    ensure_parent(out);
    write_restructured(table, out);
    run.output(out);
    run.extra()["schema_fingerprint"] = to_hex(s->fingerprint());
    run.extra()["n_window"] = table.n_window;
  }
};

struct PretrainCmd {
  std::string schema, hh, p, out;
  std::uint64_t seed = 0;
  std::optional<int> n_window;
  int latent_dim = 64;
  std::vector<int> encoder_widths{512, 384, 256, 192, 128, 96};
  std::vector<int> decoder_widths{96, 128, 192, 256, 384, 512};
  std::string reparam = "literal";
  double kl_beta = 1.0;
  std::optional<double> focal_alpha;
  double focal_gamma = 2.0;
  ScheduleFlags sched;
  int log_every = 0;

  void run(Run& run, const fs::path& reports) const {
    auto s = read_schema(schema);
    const auto table = restructure(read_records(hh, p, *s), s, n_window);
    const auto x = encode_onehot(table);
    run.stage("load");
    VaeConfig vc;
    vc.latent_dim = latent_dim;
    vc.encoder_widths = encoder_widths;
    vc.decoder_widths = decoder_widths;
    vc.reparam = reparam == "standard" ? nn::ReparamMode::kStandard : nn::ReparamMode::kLiteral;
    auto model = init_model<double>(x.layout, vc, seed);
    train::PretrainConfig pc;
    pc.schedule = sched.schedule();
    pc.lion = sched.lion();
    pc.seed = mix_seed(seed, 1);
    pc.kl_beta = kl_beta;
    pc.focal_alpha = focal_alpha;
    pc.focal_gamma = focal_gamma;
    const auto history = train::pretrain(model, x.values, pc, progress_every(log_every, "pretrain"));
    run.stage("train");
    ensure_parent(out);
    save_model(model, out);
    run.output(out);
    const fs::path hist = reports / "pretrain_history.csv";
    train::write_history(history, hist);
    run.output(hist);
    run.extra()["schema_fingerprint"] = to_hex(s->fingerprint());
    run.extra()["model_fingerprint"] = to_hex(model.fingerprint());
    run.extra()["model_checksum"] = to_hex(model.checksum());
    run.extra()["n_window"] = table.n_window;
    run.extra()["final_loss"] = history.back().total;
  }
};

// Loads the schema, the model and the microdata windowed like the model.
struct ModelContext {
  std::shared_ptr<const Schema> schema;
  std::optional<Layout> layout;
  std::optional<VaeModel<double>> model;
};

ModelContext load_context(const std::string& schema_path, const std::string& model_path) {
  ModelContext c;
  c.schema = read_schema(schema_path);
  c.layout.emplace(c.schema, peek_model_window(model_path));
  c.model.emplace(load_model<double>(model_path, *c.layout));
  c.model->set_mode(nn::Mode::kEval);
  return c;
}

struct FinetuneCmd {
  std::string schema, model, hh, p, targets, out;
  std::uint64_t seed = 0;
  double w_marginal = 1.0, w_dbce = 1.0, w_norm_kl = 0.1;
  double temperature = 1.0;
  std::size_t reference_size = 0;
  ScheduleFlags sched;
  int log_every = 0;

  void run(Run& run, const fs::path& reports) const {
    auto ctx = load_context(schema, model);
    const auto table = restructure(read_records(hh, p, *ctx.schema), ctx.schema, ctx.layout->n_window());
    const auto x = encode_onehot(table);
    const auto tm = load_target_marginals(targets, *ctx.schema);
    run.stage("load");
    auto latent = train::init_latent<double>(tm.n_households, ctx.model->latent_dim(), mix_seed(seed, 2));
    train::FinetuneConfig fc;
    fc.schedule = sched.schedule();
    fc.lion = sched.lion();
    fc.weight_marginal = w_marginal;
    fc.weight_dbce = w_dbce;
    fc.weight_norm_kl = w_norm_kl;
    fc.dbce.temperature = temperature;
    fc.reference_size = reference_size;
    fc.seed = mix_seed(seed, 3);
    const std::uint64_t before = ctx.model->decoder_checksum();
    const auto result = train::finetune(*ctx.model, latent, tm, *ctx.layout, x.values, fc,
                                        progress_every(log_every, "finetune"));
    if (ctx.model->decoder_checksum() != before) throw RuntimeError("finetune: decoder changed");
    run.stage("train");
    ensure_parent(out);
    train::save_latent(latent, out);
    run.output(out);
    const fs::path hist = reports / "finetune_history.csv";
    train::write_history(result.history, hist);
    run.output(hist);
    run.extra()["schema_fingerprint"] = to_hex(ctx.schema->fingerprint());
    run.extra()["model_fingerprint"] = to_hex(ctx.model->fingerprint());
    run.extra()["decoder_checksum"] = to_hex(before);
    run.extra()["final_marginal_rmse"] = result.final_marginal_rmse;
    run.extra()["final_dbce"] = result.final_dbce;
    run.extra()["final_norm_kl"] = result.final_norm_kl;
  }
};

struct GenerateCmd {
  std::string schema, model, latent, out_hh, out_p, provenance, rules, mode = "argmax", tract_id;
  std::optional<std::size_t> households;
  std::uint64_t seed = 0;

  void run(Run& run, const fs::path& reports) const {
    auto ctx = load_context(schema, model);
    train::LatentMatrix<double> z;
    if (!latent.empty()) {
      z = train::load_latent<double>(latent);
    } else if (households) {
      z = train::init_latent<double>(*households, ctx.model->latent_dim(), mix_seed(seed, 4));
    } else {
      throw ValidationError("generate: give --latent or --households");
    }
    const DecodeMode dm = mode == "sample" ? DecodeMode::kSample : DecodeMode::kArgmax;
    const auto inv = generate_inventory(*ctx.model, z, *ctx.layout, dm, seed, tract_id);
    run.stage("generate");
    for (const auto& path : {out_hh, out_p}) ensure_parent(path);
    const fs::path prov = provenance.empty() ? fs::path(out_hh).replace_extension(".provenance.json")
                                             : fs::path(provenance);
    write_inventory(inv, out_hh, out_p, prov);
    run.output(out_hh);
    run.output(out_p);
    run.output(prov);
    std::vector<SanityRule> rs = rules.empty() ? std::vector<SanityRule>{} : load_sanity_rules(rules);
    if (rules.empty()) {
      for (auto& r : default_sanity_rules()) {
        try {
          validate_rule(r, *ctx.schema);
          rs.push_back(std::move(r));
        } catch (const ValidationError&) {
          // built-in rule does not apply to this schema
        }
      }
    }
    for (const auto& r : rs) validate_rule(r, *ctx.schema);
    const auto report = sanity_check(inv.table, rs);
    const fs::path sp = reports / "sanity_report.csv";
    write_sanity_report(report, sp);
    run.output(sp);
    std::cout << sanity_summary(report) << "\n";
    run.extra()["schema_fingerprint"] = to_hex(ctx.schema->fingerprint());
    run.extra()["model_fingerprint"] = to_hex(ctx.model->fingerprint());
    run.extra()["households"] = inv.table.rows.size();
    run.extra()["dropped_empty_households"] = inv.provenance.dropped_empty_households;
  }
};

struct EvaluateCmd {
  std::string schema, hh, p, syn_hh, syn_p, targets, tag = "evaluate";
  double epsilon = eval::kDefaultEpsilon;

  void run(Run& run, const fs::path& reports) const {
    auto s = read_schema(schema);
    const auto micro_rec = read_records(hh, p, *s);
    const auto syn_rec = read_records(syn_hh, syn_p, *s);
    const int window = s->n_window.value_or(std::max(max_size(micro_rec), max_size(syn_rec)));
    const auto micro = restructure(micro_rec, s, window);
    const auto syn = restructure(syn_rec, s, window);
    const auto micro_m = empirical_marginals(micro);
    const auto syn_m = empirical_marginals(syn);
    const auto syn_c = empirical_counts(syn);
    std::optional<Marginals> target;
    if (!targets.empty()) target = load_target_marginals(targets, *s);
    const auto metrics = target ? eval::marginal_metrics(*s, syn_m, syn_c, *target, micro_m, epsilon)
                                : eval::marginal_metrics(*s, syn_m, syn_c, micro_m, std::nullopt, epsilon);
    const auto joint = eval::joint_pair_metrics(syn, micro, epsilon);
    run.stage("metrics");
    fs::create_directories(reports);
    const fs::path mt = reports / (tag + "_metrics.csv");
    const fs::path jr = reports / (tag + "_joint_rmse.csv");
    const fs::path jk = reports / (tag + "_joint_kl.csv");
    const fs::path jp = reports / (tag + "_joint_chi2_p.csv");
    const fs::path mr = reports / (tag + "_marginals.csv");
    eval::write_metrics_table(metrics, mt);
    eval::write_joint_tables(joint, jr, jk, jp);
    eval::write_marginals_report(*s, micro_m, syn_m, target, mr);
    for (const auto& path : {mt, jr, jk, jp, mr}) run.output(path);
    for (const auto& path : eval::emit_histograms(mr, reports / (tag + "_histograms"))) run.output(path);
    std::cout << "mean RMSE " << metrics.mean_rmse << ", mean KL " << metrics.mean_kl;
    if (metrics.mean_baseline_rmse) std::cout << ", baseline mean RMSE " << *metrics.mean_baseline_rmse;
    std::cout << "\n";
    run.extra()["schema_fingerprint"] = to_hex(s->fingerprint());
    run.extra()["mean_rmse"] = metrics.mean_rmse;
    run.extra()["mean_kl"] = metrics.mean_kl;
  }
};

struct PrivacyCmd {
  std::string schema, hh, p, a_hh, a_p, b_hh, b_p;
  int bins = 0;

  void run(Run& run, const fs::path& reports) const {
    auto s = read_schema(schema);
    const auto micro_rec = read_records(hh, p, *s);
    const auto a_rec = read_records(a_hh, a_p, *s);
    const auto b_rec = read_records(b_hh, b_p, *s);
    const int window = s->n_window.value_or(
        std::max({max_size(micro_rec), max_size(a_rec), max_size(b_rec)}));
    const auto report = eval::dcr_report(restructure(a_rec, s, window), restructure(b_rec, s, window),
                                         restructure(micro_rec, s, window), bins);
    run.stage("dcr");
    fs::create_directories(reports);
    const fs::path dist = reports / "dcr_distances.csv";
    const fs::path hist = reports / "dcr_histogram.csv";
    eval::write_dcr_report(report, dist, hist);
    run.output(dist);
    run.output(hist);
    std::cout << "K-S household D=" << report.household_ks.statistic << " p=" << report.household_ks.p_value
              << ", person D=" << report.person_ks.statistic << " p=" << report.person_ks.p_value << "\n";
    run.extra()["schema_fingerprint"] = to_hex(s->fingerprint());
    run.extra()["ks"] = {{"household", {{"statistic", report.household_ks.statistic},
                                        {"p_value", report.household_ks.p_value}}},
                         {"person", {{"statistic", report.person_ks.statistic},
                                     {"p_value", report.person_ks.p_value}}}};
  }
};

struct OracleCmd {
  std::string out_dir;
  oracle::Config config;

  void run(Run& run) const {
    const auto data = oracle::make(config);
    for (const auto& path : oracle::write(data, out_dir)) run.output(path);
    run.extra()["schema_fingerprint"] = to_hex(data.schema->fingerprint());
  }
};

int fail(int code, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "popsynth: " << line << "\n";
  return code;
}

}  // namespace
}  // namespace popsynth

int main(int argc, char** argv) {
  using namespace popsynth;
  CLI::App app{"Synthetic household-person populations from microdata and tract marginals"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);
  std::string report_flag;
  app.add_option("--report-dir", report_flag,
                 "Report output directory (default: $POPSYNTH_REPORT_DIR, then ./reports)");

  auto schema_opt = [](CLI::App* c, std::string& v) {
    c->add_option("--schema", v, "Schema file")->required()->check(CLI::ExistingFile);
  };
  auto micro_opts = [](CLI::App* c, std::string& hh, std::string& p) {
    c->add_option("--microdata-hh", hh, "Household table")->required()->check(CLI::ExistingFile);
    c->add_option("--microdata-p", p, "Person table")->required()->check(CLI::ExistingFile);
  };

  RestructureCmd rc;
  auto* c_restructure = app.add_subcommand("restructure", "Window microdata into fixed-width household rows");
  schema_opt(c_restructure, rc.schema);
  micro_opts(c_restructure, rc.hh, rc.p);
  c_restructure->add_option("--out", rc.out, "Restructured CSV")->required();
  c_restructure->add_option("--n-window", rc.n_window)->check(CLI::PositiveNumber);

  PretrainCmd pc;
  auto* c_pretrain = app.add_subcommand("pretrain", "Train the VAE on microdata");
  schema_opt(c_pretrain, pc.schema);
  micro_opts(c_pretrain, pc.hh, pc.p);
  c_pretrain->add_option("--out", pc.out, "Model file")->required();
  c_pretrain->add_option("--seed", pc.seed)->required();
  c_pretrain->add_option("--n-window", pc.n_window)->check(CLI::PositiveNumber);
  c_pretrain->add_option("--latent-dim", pc.latent_dim)->capture_default_str()->check(CLI::PositiveNumber);
  c_pretrain->add_option("--encoder-widths", pc.encoder_widths)->expected(6)->capture_default_str();
  c_pretrain->add_option("--decoder-widths", pc.decoder_widths)->expected(6)->capture_default_str();
  c_pretrain->add_option("--reparam", pc.reparam, "literal (mu + eps*logsig) or standard")
      ->capture_default_str()
      ->check(CLI::IsMember({"literal", "standard"}));
  c_pretrain->add_option("--kl-beta", pc.kl_beta)->capture_default_str();
  c_pretrain->add_option("--focal-alpha", pc.focal_alpha, "Default: fraction of zero entries");
  c_pretrain->add_option("--focal-gamma", pc.focal_gamma)->capture_default_str();
  c_pretrain->add_option("--log-every", pc.log_every, "Print the loss every N epochs");
  pc.sched.add(c_pretrain);

  FinetuneCmd fc;
  auto* c_finetune = app.add_subcommand("finetune", "Fit a tract latent matrix through the frozen decoder");
  schema_opt(c_finetune, fc.schema);
  micro_opts(c_finetune, fc.hh, fc.p);
  c_finetune->add_option("--model", fc.model)->required()->check(CLI::ExistingFile);
  c_finetune->add_option("--tract-marginals", fc.targets)->required()->check(CLI::ExistingFile);
  c_finetune->add_option("--out", fc.out, "Latent file")->required();
  c_finetune->add_option("--seed", fc.seed)->required();
  c_finetune->add_option("--w-marginal", fc.w_marginal)->capture_default_str();
  c_finetune->add_option("--w-dbce", fc.w_dbce)->capture_default_str();
  c_finetune->add_option("--w-norm-kl", fc.w_norm_kl)->capture_default_str();
  c_finetune->add_option("--temperature", fc.temperature, "Softmin temperature")->capture_default_str();
  c_finetune->add_option("--reference-size", fc.reference_size, "Microdata rows used by D-BCE (0 = all)");
  c_finetune->add_option("--log-every", fc.log_every, "Print the loss every N epochs");
  fc.sched.add(c_finetune);

  GenerateCmd gc;
  auto* c_generate = app.add_subcommand("generate", "Decode a latent matrix into an inventory");
  schema_opt(c_generate, gc.schema);
  c_generate->add_option("--model", gc.model)->required()->check(CLI::ExistingFile);
  auto* latent_opt = c_generate->add_option("--latent", gc.latent)->check(CLI::ExistingFile);
  c_generate->add_option("--households", gc.households, "Draw a prior latent of this many rows")
      ->excludes(latent_opt);
  c_generate->add_option("--out-hh", gc.out_hh)->required();
  c_generate->add_option("--out-p", gc.out_p)->required();
  c_generate->add_option("--provenance", gc.provenance);
  c_generate->add_option("--rules", gc.rules, "Sanity rules file")->check(CLI::ExistingFile);
  c_generate->add_option("--mode", gc.mode)->capture_default_str()->check(CLI::IsMember({"argmax", "sample"}));
  c_generate->add_option("--tract-id", gc.tract_id);
  c_generate->add_option("--seed", gc.seed)->required();

  EvaluateCmd ec;
  auto* c_evaluate = app.add_subcommand("evaluate", "Marginal and joint metrics of an inventory");
  schema_opt(c_evaluate, ec.schema);
  micro_opts(c_evaluate, ec.hh, ec.p);
  c_evaluate->add_option("--synthetic-hh", ec.syn_hh)->required()->check(CLI::ExistingFile);
  c_evaluate->add_option("--synthetic-p", ec.syn_p)->required()->check(CLI::ExistingFile);
  c_evaluate->add_option("--tract-marginals", ec.targets, "Score against targets, microdata as baseline")
      ->check(CLI::ExistingFile);
  c_evaluate->add_option("--tag", ec.tag, "Report file prefix")->capture_default_str();
  c_evaluate->add_option("--epsilon", ec.epsilon)->capture_default_str();

  PrivacyCmd vc;
  auto* c_privacy = app.add_subcommand("privacy", "Distance to closest record of two inventories");
  schema_opt(c_privacy, vc.schema);
  micro_opts(c_privacy, vc.hh, vc.p);
  c_privacy->add_option("--a-hh", vc.a_hh)->required()->check(CLI::ExistingFile);
  c_privacy->add_option("--a-p", vc.a_p)->required()->check(CLI::ExistingFile);
  c_privacy->add_option("--b-hh", vc.b_hh)->required()->check(CLI::ExistingFile);
  c_privacy->add_option("--b-p", vc.b_p)->required()->check(CLI::ExistingFile);
  c_privacy->add_option("--bins", vc.bins, "Bin DCR values before the K-S test (0 = raw)");

  OracleCmd oc;
  auto* c_oracle = app.add_subcommand("oracle-make", "Write a desk-scale ground-truth dataset");
  c_oracle->add_option("--out-dir", oc.out_dir)->required();
  c_oracle->add_option("--seed", oc.config.seed)->required();
  c_oracle->add_option("--households", oc.config.households)->capture_default_str();
  c_oracle->add_option("--tract-households", oc.config.tract_households)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(1, std::string(e.what()) + " (see --help)");
  }

  try {
    const fs::path reports = resolve_report_dir(report_flag);
    fs::create_directories(reports);
    CLI::App* sub = app.get_subcommands().front();
    Run run(sub->get_name(), sub);
    if (sub == c_restructure) rc.run(run);
    else if (sub == c_pretrain) pc.run(run, reports);
    else if (sub == c_finetune) fc.run(run, reports);
    else if (sub == c_generate) gc.run(run, reports);
    else if (sub == c_evaluate) ec.run(run, reports);
    else if (sub == c_privacy) vc.run(run, reports);
    else oc.run(run);
    run.finish(reports);
  } catch (const ValidationError& e) {
    return fail(1, e.what());
  } catch (const std::exception& e) {
    return fail(2, e.what());
  }
  return 0;
}
