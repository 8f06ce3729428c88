#include "mlpr/harness/trainer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <spdlog/spdlog.h>
#include <unordered_map>

#include "mlpr/error.hpp"
#include "mlpr/eval/metrics.hpp"
#include "mlpr/objective/adam.hpp"
#include "mlpr/objective/model_loss.hpp"
#include "mlpr/util/seed.hpp"

namespace mlpr::harness {

namespace {

constexpr std::uint64_t kModelInitStream = 1;
constexpr std::uint64_t kDropoutStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

const ad::Tensor* sample_weights(const objective::LossConfig& lc, const Batch& b) {
  return lc.impression_weighting ? &b.impressions : nullptr;
}

double batch_weight(const objective::LossConfig& lc, const Batch& b) {
  if (!lc.impression_weighting) return static_cast<double>(b.x.rows());
  const auto w = b.impressions.data();
  return std::accumulate(w.begin(), w.end(), 0.0);
}

double train_step(TrainedModel& t, const Batch& batch, const objective::LossConfig& lc,
                  objective::Adam& adam, std::mt19937_64& dropout_rng) {
  ad::Graph g(ad::Mode::train);
  const auto forward = t.model->forward(g, g.constant(batch.x), dropout_rng);
  const auto loss = objective::model_loss(forward, batch.labels, lc, t.uncertainty.get(),
                                          sample_weights(lc, batch));
  const double value = loss.total.value().item();
  if (!std::isfinite(value)) {
    throw NumericError("training loss became non-finite after " + std::to_string(adam.steps()) +
                       " steps");
  }
  t.model->store().zero_grad();
  g.backward(loss.total);
  adam.step();
  return value;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Bias, cosine and Hadamard features of one pair under `encoder`.
class ProbeFeatures {
 public:
  explicit ProbeFeatures(const features::HashEncoder& encoder) : encoder_(encoder) {}

  Eigen::MatrixXd matrix(const Records& records, std::size_t n) {
    Eigen::MatrixXd x(n, encoder_.dim() + 2);
    for (std::size_t r = 0; r < n; ++r) {
      const auto& rec = records[r];
      const auto inter = features::interactions(lookup(queries_, rec.query_id, rec.query_text),
                                                lookup(items_, rec.item_id, item_text(rec.item())));
      x(r, 0) = 1.0;
      x(r, 1) = inter.cosine;
      for (std::size_t j = 0; j < inter.hadamard.size(); ++j) {
        // Hash-encoder entries are O(1/sqrt(dim)); rescale so the probe's
        // step size does not depend on dim.
        x(r, 2 + j) = inter.hadamard[j] * static_cast<double>(encoder_.dim());
      }
    }
    return x;
  }

 private:
  using Cache = std::unordered_map<std::string, std::vector<double>>;

  const std::vector<double>& lookup(Cache& cache, const std::string& id, const std::string& text) {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, encoder_.encode_text(text)).first;
    return it->second;
  }

  const features::HashEncoder& encoder_;
  Cache queries_;
  Cache items_;
};

double probe_auc(const features::HashEncoder& encoder, const Records& train, std::size_t n_train,
                 const Records& validation, std::size_t n_val) {
  ProbeFeatures feats(encoder);
  const Eigen::MatrixXd x = feats.matrix(train, n_train);
  Eigen::VectorXd y(n_train);
  for (std::size_t r = 0; r < n_train; ++r) y(r) = train[r].y_click() ? 1.0 : 0.0;

  // Plain L2-regularized logistic regression, full-batch gradient descent.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd p = (x * w).unaryExpr([](double z) { return sigmoid(z); });
    const Eigen::VectorXd grad = x.transpose() * (p - y) / static_cast<double>(n_train) + 1e-3 * w;
    w -= 0.5 * grad;
  }

  const Eigen::MatrixXd xv = feats.matrix(validation, n_val);
  const Eigen::VectorXd scores = xv * w;
  std::vector<double> s(scores.data(), scores.data() + scores.size());
  std::vector<double> labels(n_val);
  for (std::size_t r = 0; r < n_val; ++r) labels[r] = validation[r].y_click() ? 1.0 : 0.0;
  try {
    return eval::auc(s, labels);
  } catch (const UndefinedMetricError&) {
    return 0.5;
  }
}

}  // namespace

TrainedModel make_model(const RunConfig& config, features::NormalizationStats stats) {
  config.validate();
  features::FeatureLayout layout{config.embedding.dim, stats.mean.size()};
  TrainedModel t;
  t.config = config;
  t.stats = std::move(stats);
  t.model = std::make_unique<model::RankingModel>(
      config.model, layout.total(), derive_seed(config.train.seed, kModelInitStream));
  if (config.loss_config().mode == objective::LossMode::uncertainty) {
    t.uncertainty = std::make_unique<objective::UncertaintyWeights>(t.model->store());
  }
  return t;
}

TrainReport train(TrainedModel& t, const FeatureCache& cache, const Records& train,
                  const Records& validation, const std::optional<std::filesystem::path>& last_good) {
  if (train.size() < 2) throw ContractError("training needs at least 2 records");
  if (validation.empty()) throw ContractError("early stopping needs a validation split");
  const auto& tc = t.config.train;
  const auto lc = t.config.loss_config();
  auto& store = t.model->store();

  objective::Adam adam(store.trainable(), tc.adam);
  std::mt19937_64 shuffle_rng(derive_seed(tc.seed, kShuffleStream));
  std::mt19937_64 dropout_rng(derive_seed(tc.seed, kDropoutStream));
  auto order = iota_rows(train.size());

  TrainReport report;
  auto best = ad::snapshot(store);
  report.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  try {
    for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
        const std::size_t len = std::min(tc.batch_size, order.size() - start);
        if (len < 2) break;  // batch norm needs two rows
        const auto batch = make_batch(cache, train, std::span(order).subspan(start, len));
        loss_sum += train_step(t, batch, lc, adam, dropout_rng);
        ++batches;
      }

      const auto val = evaluate_loss(t, cache, validation);
      if (!std::isfinite(val.total)) throw NumericError("validation loss became non-finite");
      EpochLog log;
      log.epoch = epoch;
      log.steps = adam.steps();
      log.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
      log.val_loss = val.total;
      log.val_task_loss = val.per_task;
      if (t.uncertainty) log.log_variance = t.uncertainty->values();
      report.epochs.push_back(log);
      spdlog::info("epoch {}: train loss {:.5f}, validation loss {:.5f}", epoch, log.train_loss,
                   log.val_loss);

      if (val.total < report.best_val_loss) {
        report.best_val_loss = val.total;
        report.best_epoch = epoch;
        best = ad::snapshot(store);
        since_best = 0;
      } else if (++since_best >= tc.patience) {
        report.early_stopped = true;
        spdlog::info("early stop: no validation improvement for {} epochs", tc.patience);
        break;
      }
    }
  } catch (const NumericError&) {
    ad::restore(store, best);
    if (last_good) {
      save_run(t, *last_good);
      spdlog::error("non-finite loss; last good weights saved to {}", last_good->string());
    }
    throw;
  }
  ad::restore(store, best);
  return report;
}

OverfitReport overfit(TrainedModel& t, const FeatureCache& cache, const Records& train) {
  const auto& tc = t.config.train;
  const std::size_t n = std::min(tc.overfit_samples, train.size());
  if (n < 2) throw ContractError("overfit mode needs at least 2 training records");
  const Records subset(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n));
  const auto rows = iota_rows(n);
  const auto batch = make_batch(cache, subset, rows);
  const auto lc = t.config.loss_config();

  objective::Adam adam(t.model->store().trainable(), tc.adam);
  std::mt19937_64 dropout_rng(derive_seed(tc.seed, kDropoutStream));
  OverfitReport report;
  for (std::size_t s = 0; s < tc.overfit_steps; ++s) {
    report.final_train_loss = train_step(t, batch, lc, adam, dropout_rng);
  }
  report.steps = adam.steps();
  report.final_eval_loss = evaluate_loss(t, cache, subset).total;
  return report;
}

EvalLoss evaluate_loss(const TrainedModel& t, const FeatureCache& cache, const Records& records) {
  if (records.empty()) throw ContractError("loss over an empty record set");
  const auto lc = t.config.loss_config();
  const auto rows = iota_rows(records.size());
  std::mt19937_64 unused_rng(0);
  std::array<double, model::kTaskCount> sums{};
  double weight = 0.0;
  for (std::size_t start = 0; start < rows.size(); start += t.config.train.eval_batch) {
    const std::size_t len = std::min(t.config.train.eval_batch, rows.size() - start);
    const auto batch = make_batch(cache, records, std::span(rows).subspan(start, len));
    ad::Graph g(ad::Mode::eval);
    const auto forward = t.model->forward(g, g.constant(batch.x), unused_rng);
    const double w = batch_weight(lc, batch);
    for (std::size_t k = 0; k < model::kTaskCount; ++k) {
      sums[k] += w * objective::bce_loss(forward.predicted[k], batch.labels[k],
                                         sample_weights(lc, batch)).value().item();
    }
    weight += w;
  }
  EvalLoss out;
  for (std::size_t k = 0; k < model::kTaskCount; ++k) out.per_task[k] = sums[k] / weight;
  if (lc.mode == objective::LossMode::uncertainty) {
    const auto s = t.uncertainty->values();
    out.total = objective::combine_uncertainty(out.per_task, s);
  } else {
    out.total = objective::combine_fixed(out.per_task, lc.weights);
  }
  return out;
}

TaskScores predict(const TrainedModel& t, const FeatureCache& cache, const Records& records) {
  TaskScores scores;
  for (auto& s : scores) s.reserve(records.size());
  const auto rows = iota_rows(records.size());
  std::mt19937_64 unused_rng(0);
  for (std::size_t start = 0; start < rows.size(); start += t.config.train.eval_batch) {
    const std::size_t len = std::min(t.config.train.eval_batch, rows.size() - start);
    const auto batch = make_batch(cache, records, std::span(rows).subspan(start, len));
    ad::Graph g(ad::Mode::eval);
    const auto forward = t.model->forward(g, g.constant(batch.x), unused_rng);
    for (std::size_t k = 0; k < model::kTaskCount; ++k) {
      const auto v = forward.predicted[k].value().data();
      scores[k].insert(scores[k].end(), v.begin(), v.end());
    }
  }
  return scores;
}

std::uint64_t refresh_encoder_seed(const RunConfig& config, const Records& train,
                                   const Records& validation) {
  const std::size_t n_train = std::min(config.train.refresh_probe_samples, train.size());
  const std::size_t n_val = std::min(config.train.refresh_probe_samples, validation.size());
  if (n_train < 2 || n_val < 2) throw ContractError("feature refresh probe needs training and validation data");

  std::uint64_t best_seed = config.embedding.seed;
  double best_auc = -1.0;
  for (std::size_t c = 0; c < config.train.refresh_candidates; ++c) {
    // Candidate 0 is the configured seed, so a refresh never does worse on
    // the probe than no refresh.
    const std::uint64_t seed = c == 0 ? config.embedding.seed : derive_seed(config.embedding.seed, c);
    const features::HashEncoder encoder(config.embedding.dim, seed);
    const double a = probe_auc(encoder, train, n_train, validation, n_val);
    spdlog::info("feature refresh: encoder seed {} probe click AUC {:.4f}", seed, a);
    if (a > best_auc) {
      best_auc = a;
      best_seed = seed;
    }
  }
  return best_seed;
}

std::vector<ad::NamedTensor> checkpoint_tensors(const TrainedModel& t) {
  auto tensors = ad::snapshot(t.model->store());
  tensors.push_back({"zscore/mean", ad::Tensor::vector(t.stats.mean)});
  tensors.push_back({"zscore/std", ad::Tensor::vector(t.stats.std)});
  return tensors;
}

void save_run(const TrainedModel& t, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_config(t.config, dir / "config.json");
  ad::save_checkpoint(dir / "model.ckpt", checkpoint_tensors(t));
}

TrainedModel load_run(const std::filesystem::path& dir) {
  const auto config = load_config(dir / "config.json");
  const auto tensors = ad::load_checkpoint(dir / "model.ckpt");
  features::NormalizationStats stats;
  stats.fitted_split = "train";
  bool have_mean = false, have_std = false;
  for (const auto& nt : tensors) {
    if (nt.name == "zscore/mean") {
      stats.mean.assign(nt.tensor.data().begin(), nt.tensor.data().end());
      have_mean = true;
    } else if (nt.name == "zscore/std") {
      stats.std.assign(nt.tensor.data().begin(), nt.tensor.data().end());
      have_std = true;
    }
  }
  if (!have_mean || !have_std || stats.mean.size() != stats.std.size()) {
    throw ContractError("checkpoint in " + dir.string() + " lacks consistent z-score statistics");
  }
  auto t = make_model(config, std::move(stats));
  for (const auto& nt : ad::restore(t.model->store(), tensors)) {
    if (nt.name != "zscore/mean" && nt.name != "zscore/std") {
      throw ContractError("checkpoint in " + dir.string() + " has unexpected tensor '" + nt.name +
                          "'");
    }
  }
  return t;
}

}  // namespace mlpr::harness
