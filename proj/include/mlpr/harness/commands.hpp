#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlpr/autodiff/graph.hpp"
#include "mlpr/eval/report.hpp"
#include "mlpr/harness/evaluate.hpp"
#include "mlpr/harness/latency.hpp"
#include "mlpr/harness/run_config.hpp"
#include "mlpr/harness/trainer.hpp"

// The subcommands of the `mlpr` tool as plain functions. Each writes its
// artifacts under an output directory together with a manifest.json that
// records the config snapshot, input hashes, artifact paths and timings.
namespace mlpr::harness {

inline const std::array<std::string, 3> kSplitFiles{"train.tsv", "validation.tsv", "test.tsv"};

struct Dataset {
  Records train;
  Records validation;
  Records test;
  std::array<std::string, 3> sha256;  // per split file
};

Dataset load_dataset(const std::filesystem::path& dir);

struct GenDataSummary {
  std::size_t queries = 0;
  std::size_t items = 0;
  std::size_t pairs = 0;
  std::uint64_t impressions = 0;
  std::size_t dropped = 0;  // pairs removed by the impression threshold
  std::array<std::size_t, 3> split_sizes{};
  std::array<double, 3> label_rates{};  // click, atc, purchase over kept pairs
};

GenDataSummary cmd_gen_data(const RunConfig& config, const std::filesystem::path& out);

struct TrainOutcome {
  TrainReport report;                    // empty in overfit mode
  std::optional<OverfitReport> overfit;  // overfit mode only
  std::uint64_t encoder_seed = 0;        // after any feature refresh
};

// Trains the configured variant on the dataset in `data_dir`. Overfit mode
// is selected by train.overfit_samples > 0.
TrainOutcome cmd_train(const RunConfig& config, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out);

struct EvalOptions {
  std::filesystem::path run;
  std::filesystem::path data;
  std::filesystem::path out;
  std::string split = "test";
  std::string variant;  // defaults to the run directory name
  bool oracle = false;  // also score with ground-truth probabilities
  bool by_impression_percentile = false;
  std::optional<std::filesystem::path> compare;  // second run for the t-test
};

struct EvalOutcome {
  std::vector<eval::MetricRow> rows;
  std::vector<eval::MetricRow> percentile_rows;
  std::vector<TTestRow> ttests;
};

EvalOutcome cmd_eval(const EvalOptions& options);

// The six ablation variants in order. Variant k+1 differs from variant k in
// exactly the toggle named by its entry.
struct AblationVariant {
  std::string name;
  std::string toggle;  // empty for the first
  RunConfig config;
};
std::vector<AblationVariant> ablation_variants(const RunConfig& base);

// Toggle names whose values differ between two model configs.
std::vector<std::string> toggle_difference(const model::ModelConfig& a, const model::ModelConfig& b);

struct DeltaRow {
  std::string variant;
  std::string previous;
  std::string toggle;
  std::string task;
  std::string metric;
  std::optional<std::size_t> k;
  std::optional<double> delta;  // empty when either side is undefined
};

struct AblationOutcome {
  std::vector<eval::MetricRow> rows;
  std::vector<DeltaRow> deltas;
  std::vector<std::string> failures;  // "<variant>: <error>"
};

AblationOutcome cmd_ablate(const RunConfig& base, const std::filesystem::path& data_dir,
                           const std::filesystem::path& out);

std::vector<LatencyReport> cmd_bench_latency(const std::filesystem::path& run,
                                             const std::filesystem::path& data_dir,
                                             const std::vector<LatencyMode>& modes,
                                             const std::filesystem::path& out);

struct GradcheckEntry {
  std::string name;  // op name, or "end_to_end"
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_error < tolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double seconds = 0.0;
  bool pass() const;
};

// Every autodiff op at h = 1e-5 against 1e-4, then the tiny end-to-end
// model against 1e-3. `fault` corrupts that op's backward rule everywhere.
GradcheckReport cmd_gradcheck(std::optional<ad::OpKind> fault = std::nullopt,
                              const std::optional<std::filesystem::path>& out = std::nullopt);

// Tiny architecture used by the end-to-end gradient check.
model::ModelConfig tiny_model_config();

// Command-line entry point. Returns the process exit code: 0 on success,
// 2 on I/O or parse failures, 1 on anything else.
int run_cli(int argc, const char* const* argv);

}  // namespace mlpr::harness
