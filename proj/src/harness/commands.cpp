#include "mlpr/harness/commands.hpp"

#include <chrono>
#include <fstream>
#include <random>
#include <set>
#include <spdlog/spdlog.h>

#include "mlpr/autodiff/grad_check.hpp"
#include "mlpr/data/tsv.hpp"
#include "mlpr/error.hpp"
#include "mlpr/harness/hash.hpp"
#include "mlpr/objective/model_grad_check.hpp"

namespace mlpr::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

json dataset_json(const Dataset& d) {
  return json{{"train", d.sha256[0]}, {"validation", d.sha256[1]}, {"test", d.sha256[2]}};
}

void save_train_log(const TrainReport& report, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,steps,train_loss,val_loss,val_loss_click,val_loss_atc,val_loss_purchase,"
         "s_click,s_atc,s_purchase\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << e.steps << ',' << data::format_double(e.train_loss) << ','
        << data::format_double(e.val_loss);
    for (double v : e.val_task_loss) out << ',' << data::format_double(v);
    for (double v : e.log_variance) out << ',' << data::format_double(v);
    out << '\n';
  }
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

void save_overfit_log(const OverfitReport& report, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "steps,final_train_loss,final_eval_loss\n"
      << report.steps << ',' << data::format_double(report.final_train_loss) << ','
      << data::format_double(report.final_eval_loss) << '\n';
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

// Trains one variant into `out`; shared by train and ablate.
TrainOutcome train_into(RunConfig config, const Dataset& data, const fs::path& out) {
  const auto start = Clock::now();
  config.validate();
  make_dir(out);

  TrainOutcome outcome;
  if (config.model.feature_refresh) {
    config.embedding.seed = refresh_encoder_seed(config, data.train, data.validation);
  }
  outcome.encoder_seed = config.embedding.seed;

  const auto provider = make_provider(config.embedding);
  FeatureCache cache(*provider, fit_ranking_stats(data.train));
  cache.add(data.train);
  cache.add(data.validation);
  auto trained = make_model(config, cache.stats());

  json artifacts{{"config", "config.json"}, {"checkpoint", "model.ckpt"}, {"training_log", "train_log.csv"}};
  if (config.train.overfit_samples > 0) {
    outcome.overfit = overfit(trained, cache, data.train);
    save_overfit_log(*outcome.overfit, out / "train_log.csv");
    spdlog::info("overfit: {} steps, final loss {:.6f} (train mode) {:.6f} (eval mode)",
                 outcome.overfit->steps, outcome.overfit->final_train_loss,
                 outcome.overfit->final_eval_loss);
  } else {
    outcome.report = train(trained, cache, data.train, data.validation, out / "last_good");
    save_train_log(outcome.report, out / "train_log.csv");
  }
  save_run(trained, out);

  write_json(json{{"command", "train"},
                  {"config", to_json(trained.config)},
                  {"dataset_sha256", dataset_json(data)},
                  {"artifacts", artifacts},
                  {"checkpoint_sha256", sha256_file(out / "model.ckpt")},
                  {"wall_clock_seconds", seconds_since(start)}},
             out / "manifest.json");
  return outcome;
}

const Records& split_by_name(const Dataset& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "validation") return d.validation;
  if (name == "test") return d.test;
  throw ContractError("unknown split '" + name + "' (train, validation, test)");
}

Evaluation evaluate_run(const TrainedModel& trained, const Records& records, const std::string& variant,
                        const std::vector<std::size_t>& ks, TaskScores* scores_out = nullptr) {
  const auto provider = make_provider(trained.config.embedding);
  FeatureCache cache(*provider, trained.stats);
  cache.add(records);
  auto scores = predict(trained, cache, records);
  auto e = evaluate(variant, records, scores, ks);
  if (scores_out) *scores_out = std::move(scores);
  return e;
}

void save_deltas_csv(const std::vector<DeltaRow>& rows, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "variant,previous,toggle,task,metric,k,delta\n";
  for (const auto& r : rows) {
    out << eval::csv_field(r.variant) << ',' << eval::csv_field(r.previous) << ',' << r.toggle << ','
        << r.task << ',' << r.metric << ',' << (r.k ? std::to_string(*r.k) : "") << ','
        << (r.delta ? data::format_double(*r.delta) : "NA") << '\n';
  }
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  std::array<Records*, 3> parts{&d.train, &d.validation, &d.test};
  for (std::size_t s = 0; s < 3; ++s) {
    const auto path = dir / kSplitFiles[s];
    *parts[s] = data::load_tsv(path);
    d.sha256[s] = sha256_file(path);
  }
  return d;
}

GenDataSummary cmd_gen_data(const RunConfig& config, const fs::path& out) {
  const auto start = Clock::now();
  config.validate();
  make_dir(out);
  const auto all = data::generate(config.data.funnel);
  const auto kept = data::filter_min_impressions(all, config.data.min_impressions);
  const auto parts = data::split(kept, config.data.split);

  GenDataSummary s;
  std::set<std::string> queries, items;
  std::array<std::size_t, 3> positives{};
  for (const auto& r : kept) {
    queries.insert(r.query_id);
    items.insert(r.item_id);
    s.impressions += r.impressions;
    for (std::size_t k = 0; k < model::kTaskCount; ++k) positives[k] += r.label(k);
  }
  s.queries = queries.size();
  s.items = items.size();
  s.pairs = kept.size();
  s.dropped = all.size() - kept.size();
  for (std::size_t k = 0; k < 3; ++k) {
    s.label_rates[k] = kept.empty() ? 0.0 : static_cast<double>(positives[k]) / static_cast<double>(kept.size());
  }
  const std::array<const Records*, 3> split_parts{&parts.train, &parts.validation, &parts.test};
  json hashes;
  for (std::size_t i = 0; i < 3; ++i) {
    data::save_tsv(*split_parts[i], out / kSplitFiles[i]);
    s.split_sizes[i] = split_parts[i]->size();
    hashes[kSplitFiles[i]] = sha256_file(out / kSplitFiles[i]);
  }
  write_json(json{{"command", "gen-data"},
                  {"config", to_json(config)},
                  {"counts",
                   {{"queries", s.queries},
                    {"items", s.items},
                    {"pairs", s.pairs},
                    {"impressions", s.impressions},
                    {"dropped_pairs", s.dropped},
                    {"split_sizes", s.split_sizes},
                    {"label_rates", s.label_rates}}},
                  {"artifacts_sha256", hashes},
                  {"wall_clock_seconds", seconds_since(start)}},
             out / "manifest.json");
  return s;
}

TrainOutcome cmd_train(const RunConfig& config, const fs::path& data_dir, const fs::path& out) {
  return train_into(config, load_dataset(data_dir), out);
}

EvalOutcome cmd_eval(const EvalOptions& o) {
  const auto start = Clock::now();
  make_dir(o.out);
  const auto data = load_dataset(o.data);
  const auto trained = load_run(o.run);
  const auto& records = split_by_name(data, o.split);
  const auto& ks = trained.config.ndcg_k;
  const std::string variant = o.variant.empty() ? o.run.filename().string() : o.variant;

  EvalOutcome outcome;
  TaskScores scores;
  const auto main = evaluate_run(trained, records, variant, ks, &scores);
  outcome.rows = main.rows;
  if (o.oracle) {
    const auto oracle = oracle_scores(records);
    const auto e = evaluate("oracle", records, oracle, ks);
    outcome.rows.insert(outcome.rows.end(), e.rows.begin(), e.rows.end());
    if (o.by_impression_percentile) {
      const auto p = evaluate_by_impression_percentile("oracle", records, oracle, ks);
      outcome.percentile_rows.insert(outcome.percentile_rows.end(), p.begin(), p.end());
    }
  }
  if (o.by_impression_percentile) {
    const auto p = evaluate_by_impression_percentile(variant, records, scores, ks);
    outcome.percentile_rows.insert(outcome.percentile_rows.begin(), p.begin(), p.end());
  }
  json artifacts{{"metrics", "metrics.csv"}};
  eval::save_metrics_csv(outcome.rows, o.out / "metrics.csv");
  if (o.by_impression_percentile) {
    eval::save_metrics_csv(outcome.percentile_rows, o.out / "metrics_by_impressions.csv");
    artifacts["metrics_by_impressions"] = "metrics_by_impressions.csv";
  }
  if (o.compare) {
    const auto other = load_run(*o.compare);
    const std::string other_name = o.compare->filename().string();
    const auto e = evaluate_run(other, records, other_name, ks);
    outcome.ttests = compare(variant, main, other_name, e, ks);
    save_ttest_csv(outcome.ttests, o.out / "ttest.csv");
    artifacts["ttest"] = "ttest.csv";
  }
  write_json(json{{"command", "eval"},
                  {"run", o.run.string()},
                  {"config", to_json(trained.config)},
                  {"split", o.split},
                  {"dataset_sha256", dataset_json(data)},
                  {"checkpoint_sha256", sha256_file(o.run / "model.ckpt")},
                  {"artifacts", artifacts},
                  {"wall_clock_seconds", seconds_since(start)}},
             o.out / "manifest.json");
  return outcome;
}

std::vector<std::string> toggle_difference(const model::ModelConfig& a, const model::ModelConfig& b) {
  std::vector<std::string> out;
  if (a.uncertainty_loss != b.uncertainty_loss) out.emplace_back("uncertainty_loss");
  if (a.specific_experts != b.specific_experts) out.emplace_back("specific_experts");
  if (a.attention_units != b.attention_units) out.emplace_back("attention_units");
  if (a.probability_transfer != b.probability_transfer) out.emplace_back("probability_transfer");
  if (a.single_task != b.single_task) out.emplace_back("single_task");
  if (a.feature_refresh != b.feature_refresh) out.emplace_back("feature_refresh");
  return out;
}

std::vector<AblationVariant> ablation_variants(const RunConfig& base) {
  RunConfig c = base;
  auto& m = c.model;
  m.single_task = false;
  m.uncertainty_loss = m.specific_experts = m.attention_units = m.probability_transfer = false;
  m.feature_refresh = false;

  std::vector<AblationVariant> out{{"base_mtl", "", c}};
  const auto add = [&](const char* name, const char* toggle, bool model::ModelConfig::*field) {
    m.*field = true;
    out.push_back({name, toggle, c});
  };
  add("+uncertainty_loss", "uncertainty_loss", &model::ModelConfig::uncertainty_loss);
  add("+specific_experts", "specific_experts", &model::ModelConfig::specific_experts);
  add("+attention_units", "attention_units", &model::ModelConfig::attention_units);
  add("+probability_transfer", "probability_transfer", &model::ModelConfig::probability_transfer);
  add("+feature_refresh", "feature_refresh", &model::ModelConfig::feature_refresh);
  return out;
}

AblationOutcome cmd_ablate(const RunConfig& base, const fs::path& data_dir, const fs::path& out) {
  const auto start = Clock::now();
  make_dir(out);
  const auto data = load_dataset(data_dir);
  const auto variants = ablation_variants(base);

  AblationOutcome outcome;
  json variant_json = json::array();
  std::vector<std::vector<eval::MetricRow>> per_variant;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const auto& var = variants[v];
    const auto dir = out / "variants" / (std::to_string(v) + "_" + var.name.substr(var.name[0] == '+'));
    std::vector<eval::MetricRow> rows;
    std::string failure;
    try {
      spdlog::info("ablation variant {}/{}: {}", v + 1, variants.size(), var.name);
      train_into(var.config, data, dir);
      rows = evaluate_run(load_run(dir), data.test, var.name, var.config.ndcg_k).rows;
    } catch (const Error& e) {
      failure = e.what();
      outcome.failures.push_back(var.name + ": " + failure);
      spdlog::error("ablation variant {} failed: {}", var.name, failure);
      // Keep the grid shape; every metric of a failed variant is NA.
      for (std::size_t task = 0; task < model::kTaskCount; ++task) {
        rows.push_back({var.name, std::string(model::kTaskNames[task]), "AUC", std::nullopt, std::nullopt, 0, 0});
        for (std::size_t k : var.config.ndcg_k) {
          rows.push_back({var.name, std::string(model::kTaskNames[task]), "NDCG", k, std::nullopt, 0, 0});
        }
      }
    }
    variant_json.push_back({{"name", var.name},
                            {"toggle", var.toggle},
                            {"directory", dir.lexically_relative(out).string()},
                            {"dataset_sha256", dataset_json(data)},
                            {"failure", failure.empty() ? json(nullptr) : json(failure)}});
    outcome.rows.insert(outcome.rows.end(), rows.begin(), rows.end());
    per_variant.push_back(std::move(rows));
  }

  for (std::size_t v = 1; v < per_variant.size(); ++v) {
    const auto& now = per_variant[v];
    const auto& before = per_variant[v - 1];
    for (std::size_t i = 0; i < now.size() && i < before.size(); ++i) {
      DeltaRow d{variants[v].name, variants[v - 1].name, variants[v].toggle, now[i].task,
                 now[i].metric, now[i].k, std::nullopt};
      if (now[i].value && before[i].value) d.delta = *now[i].value - *before[i].value;
      outcome.deltas.push_back(d);
    }
  }

  eval::save_metrics_csv(outcome.rows, out / "ablation.csv");
  save_deltas_csv(outcome.deltas, out / "ablation_deltas.csv");
  write_json(json{{"command", "ablate"},
                  {"config", to_json(base)},
                  {"dataset_sha256", dataset_json(data)},
                  {"variants", variant_json},
                  {"artifacts", {{"report", "ablation.csv"}, {"deltas", "ablation_deltas.csv"}}},
                  {"failures", outcome.failures},
                  {"note", "the +feature_refresh row re-picks hash-encoder seeds with a probe; it "
                           "stands in for encoder fine-tuning and is not equivalent to it"},
                  {"wall_clock_seconds", seconds_since(start)}},
             out / "manifest.json");
  return outcome;
}

std::vector<LatencyReport> cmd_bench_latency(const fs::path& run, const fs::path& data_dir,
                                             const std::vector<LatencyMode>& modes, const fs::path& out) {
  const auto start = Clock::now();
  make_dir(out);
  const auto trained = load_run(run);
  const auto data = load_dataset(data_dir);
  const auto& b = trained.config.bench;
  const auto lists = candidate_lists(data.test, b.queries, b.candidates);
  const auto host = host_info();

  const auto reports = bench_latency(trained, lists, modes, b.warmup, b.repeats);
  json artifacts;
  for (const auto& report : reports) {
    const std::string mode(latency_mode_name(report.mode));
    write_json(to_json(report, host), out / ("latency_" + mode + ".json"));
    artifacts[mode] = "latency_" + mode + ".json";
    spdlog::info("{}: p99 {:.3f} ms, mean {:.3f} ms over {} queries x {} candidates", mode,
                 report.p99_ms, report.mean_ms, report.queries, report.candidates);
  }
  write_json(json{{"command", "bench-latency"},
                  {"run", run.string()},
                  {"checkpoint_sha256", sha256_file(run / "model.ckpt")},
                  {"dataset_sha256", dataset_json(data)},
                  {"artifacts", artifacts},
                  {"wall_clock_seconds", seconds_since(start)}},
             out / "manifest.json");
  return reports;
}

bool GradcheckReport::pass() const {
  for (const auto& e : entries) {
    if (!e.pass()) return false;
  }
  return !entries.empty();
}

model::ModelConfig tiny_model_config() {
  model::ModelConfig c;
  c.expert_hidden = {8, 8};
  c.tower_hidden = {8};
  c.tower_dim = 4;
  return c;
}

GradcheckReport cmd_gradcheck(std::optional<ad::OpKind> fault, const std::optional<fs::path>& out) {
  constexpr double kStep = 1e-5;
  constexpr double kOpTolerance = 1e-4;
  constexpr double kModelTolerance = 1e-3;
  const auto start = Clock::now();
  GradcheckReport report;

  std::mt19937_64 rng(2024);
  for (const auto kind : ad::differentiable_ops()) {
    ad::GradCheckOptions options;
    options.corrupt_backward = fault;
    const auto point = ad::random_sample_point(kind, rng);
    report.entries.push_back({std::string(ad::op_name(kind)), ad::grad_check(kind, point, kStep, options),
                              kOpTolerance});
  }

  // Tiny full model: embedding dim 4 and 2 ranking features, batch of 4.
  constexpr std::size_t kInput = 5 * 4 + 1 + 2;
  model::RankingModel m(tiny_model_config(), kInput, 21);
  objective::UncertaintyWeights s(m.store());
  m.store().get("uncertainty/s1").value[0] = 0.3;
  m.store().get("uncertainty/s2").value[0] = -0.2;
  ad::Tensor x({4, kInput});
  std::normal_distribution<double> normal;
  for (double& v : x.data()) v = normal(rng);
  const std::array<ad::Tensor, model::kTaskCount> labels{
      ad::Tensor({4, 1}, {1, 1, 0, 1}), ad::Tensor({4, 1}, {1, 0, 0, 1}), ad::Tensor({4, 1}, {0, 0, 0, 1})};
  const auto e2e = objective::check_model_gradients(m, x, labels, objective::LossConfig{}, &s, kStep, 3, fault);
  report.entries.push_back({"end_to_end", e2e.max_error, kModelTolerance});
  report.seconds = seconds_since(start);

  if (out) {
    make_dir(*out);
    std::ofstream csv(*out / "gradcheck.csv", std::ios::binary);
    if (!csv) throw IoError("cannot open " + (*out / "gradcheck.csv").string() + " for writing");
    csv << "check,max_error,tolerance,pass\n";
    for (const auto& e : report.entries) {
      csv << e.name << ',' << data::format_double(e.max_error) << ',' << data::format_double(e.tolerance)
          << ',' << (e.pass() ? "true" : "false") << '\n';
    }
    if (!csv.flush()) throw IoError("failed writing gradcheck.csv");
  }
  return report;
}

}  // namespace mlpr::harness
