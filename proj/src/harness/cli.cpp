#include <CLI11.hpp>
#include <cstdio>
#include <spdlog/spdlog.h>

#include "mlpr/error.hpp"
#include "mlpr/harness/commands.hpp"

namespace mlpr::harness {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) apply_seed(c, *g.seed);
  c.validate();
  return c;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw ContractError("--out <dir> is required");
  return g.out;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Multi-task engagement ranking: data, training, evaluation and benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run config (defaults apply to missing keys)");
  app.add_option("--seed", g.seed, "Seed for data generation, splitting and training");
  app.add_option("--out", g.out, "Output directory");

  auto* gen = app.add_subcommand("gen-data", "Generate, filter and split a synthetic funnel dataset");

  auto* train_cmd = app.add_subcommand("train", "Train the configured variant");
  std::string data_dir;
  train_cmd->add_option("--data", data_dir, "Dataset directory from gen-data")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Per-task AUC and NDCG@k of a trained run");
  EvalOptions eo;
  std::string run_dir, compare_dir;
  eval_cmd->add_option("--run", run_dir, "Run directory from train")->required();
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  eval_cmd->add_option("--split", eo.split, "Split to score (default test)");
  eval_cmd->add_option("--name", eo.variant, "Variant name in the report");
  eval_cmd->add_flag("--oracle", eo.oracle, "Also report ground-truth probability scores");
  eval_cmd->add_flag("--by-impression-percentile", eo.by_impression_percentile,
                     "Metrics per impression group (0-25, 25-75, 75-100 percentiles)");
  eval_cmd->add_option("--compare", compare_dir, "Second run: paired per-query t-test on NDCG@k");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate the six ablation variants");
  ablate_cmd->add_option("--data", data_dir, "Dataset directory")->required();

  auto* bench_cmd = app.add_subcommand("bench-latency", "P99 ranking latency of a trained run");
  std::string mode = "both";
  bench_cmd->add_option("--run", run_dir, "Run directory")->required();
  bench_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  bench_cmd->add_option("--mode", mode, "precompute, recompute or both")
      ->check(CLI::IsMember({"precompute", "recompute", "both"}));

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every op and a tiny model");
  std::string fault;
  grad_cmd->add_option("--inject-fault", fault)->group("");  // harness self-test only

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      const auto s = cmd_gen_data(resolve(g), require_out(g));
      std::printf("queries\titems\tpairs\timpressions\tdropped\n%zu\t%zu\t%zu\t%llu\t%zu\n", s.queries,
                  s.items, s.pairs, static_cast<unsigned long long>(s.impressions), s.dropped);
      std::printf("split sizes (train/validation/test): %zu / %zu / %zu\n", s.split_sizes[0],
                  s.split_sizes[1], s.split_sizes[2]);
      std::printf("label rates (click/atc/purchase): %.4f / %.4f / %.4f\n", s.label_rates[0],
                  s.label_rates[1], s.label_rates[2]);
    } else if (train_cmd->parsed()) {
      const auto o = cmd_train(resolve(g), data_dir, require_out(g));
      if (o.overfit) {
        std::printf("overfit: %zu steps, final total loss %.6g\n", o.overfit->steps, o.overfit->final_eval_loss);
      } else {
        std::printf("best epoch %zu of %zu, validation loss %.6g%s\n", o.report.best_epoch,
                    o.report.epochs.size(), o.report.best_val_loss,
                    o.report.early_stopped ? " (early stopped)" : "");
      }
    } else if (eval_cmd->parsed()) {
      eo.run = run_dir;
      eo.data = data_dir;
      eo.out = require_out(g);
      if (!compare_dir.empty()) eo.compare = compare_dir;
      const auto o = cmd_eval(eo);
      for (const auto& r : o.rows) {
        std::printf("%-12s %-9s %-4s %-2s %s\n", r.model_variant.c_str(), r.task.c_str(), r.metric.c_str(),
                    r.k ? std::to_string(*r.k).c_str() : "", r.value ? std::to_string(*r.value).c_str() : "NA");
      }
      for (const auto& t : o.ttests) {
        std::printf("t-test %s NDCG@%zu: t=%.4f p=%.4g over %zu queries\n", t.task.c_str(), t.k, t.t,
                    t.p_value, t.n_queries);
      }
    } else if (ablate_cmd->parsed()) {
      const auto o = cmd_ablate(resolve(g), data_dir, require_out(g));
      std::printf("%zu report rows, %zu deltas\n", o.rows.size(), o.deltas.size());
      for (const auto& f : o.failures) std::fprintf(stderr, "variant failed: %s\n", f.c_str());
      if (!o.failures.empty()) return 1;
    } else if (bench_cmd->parsed()) {
      std::vector<LatencyMode> modes;
      if (mode == "both") {
        modes = {LatencyMode::precompute, LatencyMode::recompute};
      } else {
        modes = {latency_mode_from_name(mode)};
      }
      for (const auto& r : cmd_bench_latency(run_dir, data_dir, modes, require_out(g))) {
        std::printf("%s p99 %.3f ms (mean %.3f ms)\n", std::string(latency_mode_name(r.mode)).c_str(),
                    r.p99_ms, r.mean_ms);
      }
    } else if (grad_cmd->parsed()) {
      std::optional<ad::OpKind> kind;
      if (!fault.empty()) {
        kind = ad::op_from_name(fault);
        if (!kind) throw ContractError("unknown op '" + fault + "'");
      }
      std::optional<fs::path> out;
      if (!g.out.empty()) out = g.out;
      const auto report = cmd_gradcheck(kind, out);
      for (const auto& e : report.entries) {
        std::printf("%-10s max error %.3e (tolerance %.0e) %s\n", e.name.c_str(), e.max_error, e.tolerance,
                    e.pass() ? "PASS" : "FAIL");
      }
      std::printf("gradcheck %s in %.2f s\n", report.pass() ? "PASS" : "FAIL", report.seconds);
      if (!report.pass()) return 1;
    }
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace mlpr::harness
