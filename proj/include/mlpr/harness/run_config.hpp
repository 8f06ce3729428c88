#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlpr/data/generator.hpp"
#include "mlpr/data/split.hpp"
#include "mlpr/model/config.hpp"
#include "mlpr/objective/adam.hpp"
#include "mlpr/objective/loss.hpp"

namespace mlpr::harness {

struct DataConfig {
  data::FunnelParams funnel;
  std::uint32_t min_impressions = 5;  // pairs with impressions <= this are dropped
  data::SplitOptions split;
};

enum class EmbeddingMode { hash, file };

struct EmbeddingConfig {
  EmbeddingMode mode = EmbeddingMode::hash;
  std::size_t dim = 256;
  std::uint64_t seed = 0;
  std::string query_file;  // file mode only
  std::string item_file;
};

struct TrainConfig {
  std::size_t max_epochs = 30;
  std::size_t batch_size = 256;
  std::size_t patience = 3;
  std::size_t eval_batch = 2048;
  objective::AdamOptions adam;
  std::uint64_t seed = 1;
  // Overfit mode: train on the first `overfit_samples` training pairs for
  // exactly `overfit_steps` full-batch steps. 0 disables it.
  std::size_t overfit_samples = 0;
  std::size_t overfit_steps = 2000;
  // Feature-refresh probe: candidate encoder seeds tried and the number of
  // training/validation pairs the probe sees.
  std::size_t refresh_candidates = 4;
  std::size_t refresh_probe_samples = 4000;
};

struct BenchConfig {
  std::size_t queries = 200;
  std::size_t candidates = 100;
  std::size_t warmup = 10;
  std::size_t repeats = 5;  // timed rankings per query; the median is the sample
};

struct RunConfig {
  DataConfig data;
  EmbeddingConfig embedding;
  model::ModelConfig model;
  // Only the fixed weights and impression weighting are read from here; the
  // loss mode follows model.uncertainty_loss (see loss_config()).
  objective::LossConfig loss;
  TrainConfig train;
  BenchConfig bench;
  std::vector<std::size_t> ndcg_k{1, 5};

  objective::LossConfig loss_config() const;
  void validate() const;
};

// Every field is written, so a saved config replays the run on its own.
nlohmann::json to_json(const RunConfig& config);

// Missing keys keep their defaults; unknown keys and type mismatches throw
// ContractError naming the key path.
RunConfig config_from_json(const nlohmann::json& json);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

// Points every seed of the run (generator, split, training) at `seed`.
void apply_seed(RunConfig& config, std::uint64_t seed);

}  // namespace mlpr::harness
