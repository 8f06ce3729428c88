#include "mlpr/harness/run_config.hpp"

#include <fstream>
#include <set>

#include "mlpr/error.hpp"

namespace mlpr::harness {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so anything
// left over can be reported as a typo.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ContractError("config " + where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const auto it = node_.find(key);
    if (it == node_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ContractError("config " + path_ + "." + key + ": " + e.what());
    }
  }

  // Visits a nested object if present.
  template <class F>
  void child(const char* key, F&& visit) {
    const auto it = node_.find(key);
    if (it == node_.end()) return;
    seen_.insert(key);
    Reader sub(*it, path_ + "." + key);
    visit(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ContractError("unknown config key " + path_ + "." + key);
    }
  }

 private:
  std::string where() const { return path_.empty() ? "root" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

json links_json(const std::array<data::StageLink, 3>& links) {
  json out = json::array();
  for (const auto& l : links) out.push_back({l.a, l.b});
  return out;
}

std::string_view readout_name(model::AttentionReadout r) {
  return r == model::AttentionReadout::mean ? "mean" : "position";
}

}  // namespace

objective::LossConfig RunConfig::loss_config() const {
  objective::LossConfig out = loss;
  out.mode = model.uncertainty_loss ? objective::LossMode::uncertainty : objective::LossMode::fixed;
  return out;
}

void RunConfig::validate() const {
  data.funnel.validate();
  model.validate();
  loss_config().validate();
  if (embedding.dim == 0) throw ContractError("embedding.dim must be positive");
  if (embedding.mode == EmbeddingMode::file && (embedding.query_file.empty() || embedding.item_file.empty())) {
    throw ContractError("embedding mode 'file' needs query_file and item_file");
  }
  if (model.feature_refresh && embedding.mode != EmbeddingMode::hash) {
    throw ContractError("feature_refresh only applies to the hash encoder");
  }
  if (train.batch_size == 0 || train.eval_batch == 0) throw ContractError("batch sizes must be positive");
  if (train.max_epochs == 0) throw ContractError("train.max_epochs must be positive");
  if (train.refresh_candidates == 0) throw ContractError("train.refresh_candidates must be positive");
  if (!(train.adam.lr > 0.0)) throw ContractError("train.adam.lr must be positive");
  if (bench.queries == 0 || bench.candidates == 0 || bench.repeats == 0) throw ContractError("bench sizes must be positive");
  for (std::size_t k : ndcg_k) {
    if (k < 1) throw ContractError("ndcg_k entries must be at least 1");
  }
}

json to_json(const RunConfig& c) {
  const auto& f = c.data.funnel;
  const auto& m = c.model;
  const auto& t = c.train;
  return json{
      {"data",
       {{"funnel",
         {{"n_queries", f.n_queries},
          {"n_items", f.n_items},
          {"items_per_query", f.items_per_query},
          {"latent_dim", f.latent_dim},
          {"n_topics", f.n_topics},
          {"same_topic_fraction", f.same_topic_fraction},
          {"relevance_scale", f.relevance_scale},
          {"color_bonus", f.color_bonus},
          {"links", links_json(f.links)},
          {"poisson_mean", f.poisson_mean},
          {"n_ranking_features", f.n_ranking_features},
          {"informative_features", f.informative_features},
          {"feature_noise", f.feature_noise},
          {"with_ground_truth", f.with_ground_truth},
          {"seed", f.seed}}},
        {"min_impressions", c.data.min_impressions},
        {"split",
         {{"fractions", c.data.split.fractions},
          {"seed", c.data.split.seed},
          {"query_disjoint", c.data.split.query_disjoint}}}}},
      {"embedding",
       {{"mode", c.embedding.mode == EmbeddingMode::file ? "file" : "hash"},
        {"dim", c.embedding.dim},
        {"seed", c.embedding.seed},
        {"query_file", c.embedding.query_file},
        {"item_file", c.embedding.item_file}}},
      {"model",
       {{"uncertainty_loss", m.uncertainty_loss},
        {"specific_experts", m.specific_experts},
        {"attention_units", m.attention_units},
        {"probability_transfer", m.probability_transfer},
        {"single_task", m.single_task},
        {"feature_refresh", m.feature_refresh},
        {"expert_hidden", m.expert_hidden},
        {"stage1_experts", m.stage1_experts},
        {"stage2_shared", m.stage2_shared},
        {"stage2_specific", m.stage2_specific},
        {"tower_hidden", m.tower_hidden},
        {"tower_dim", m.tower_dim},
        {"dropout", m.dropout},
        {"bn_momentum", m.bn_momentum},
        {"bn_eps", m.bn_eps},
        {"attention_readout", readout_name(m.attention_readout)}}},
      {"loss", {{"weights", c.loss.weights}, {"impression_weighting", c.loss.impression_weighting}}},
      {"train",
       {{"max_epochs", t.max_epochs},
        {"batch_size", t.batch_size},
        {"patience", t.patience},
        {"eval_batch", t.eval_batch},
        {"adam", {{"lr", t.adam.lr}, {"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}},
        {"seed", t.seed},
        {"overfit_samples", t.overfit_samples},
        {"overfit_steps", t.overfit_steps},
        {"refresh_candidates", t.refresh_candidates},
        {"refresh_probe_samples", t.refresh_probe_samples}}},
      {"bench",
       {{"queries", c.bench.queries}, {"candidates", c.bench.candidates}, {"warmup", c.bench.warmup}, {"repeats", c.bench.repeats}}},
      {"ndcg_k", c.ndcg_k},
  };
}

RunConfig config_from_json(const json& root) {
  RunConfig c;
  Reader r(root, "");
  r.child("data", [&](Reader& d) {
    d.child("funnel", [&](Reader& f) {
      auto& p = c.data.funnel;
      f.get("n_queries", p.n_queries);
      f.get("n_items", p.n_items);
      f.get("items_per_query", p.items_per_query);
      f.get("latent_dim", p.latent_dim);
      f.get("n_topics", p.n_topics);
      f.get("same_topic_fraction", p.same_topic_fraction);
      f.get("relevance_scale", p.relevance_scale);
      f.get("color_bonus", p.color_bonus);
      std::vector<std::array<double, 2>> links;
      f.get("links", links);
      if (!links.empty()) {
        if (links.size() != 3) throw ContractError("config .data.funnel.links needs 3 [a, b] pairs");
        for (std::size_t k = 0; k < 3; ++k) p.links[k] = {links[k][0], links[k][1]};
      }
      f.get("poisson_mean", p.poisson_mean);
      f.get("n_ranking_features", p.n_ranking_features);
      f.get("informative_features", p.informative_features);
      f.get("feature_noise", p.feature_noise);
      f.get("with_ground_truth", p.with_ground_truth);
      f.get("seed", p.seed);
    });
    d.get("min_impressions", c.data.min_impressions);
    d.child("split", [&](Reader& s) {
      s.get("fractions", c.data.split.fractions);
      s.get("seed", c.data.split.seed);
      s.get("query_disjoint", c.data.split.query_disjoint);
    });
  });
  r.child("embedding", [&](Reader& e) {
    std::string mode = "hash";
    e.get("mode", mode);
    if (mode == "hash") {
      c.embedding.mode = EmbeddingMode::hash;
    } else if (mode == "file") {
      c.embedding.mode = EmbeddingMode::file;
    } else {
      throw ContractError("config .embedding.mode must be 'hash' or 'file', got '" + mode + "'");
    }
    e.get("dim", c.embedding.dim);
    e.get("seed", c.embedding.seed);
    e.get("query_file", c.embedding.query_file);
    e.get("item_file", c.embedding.item_file);
  });
  r.child("model", [&](Reader& m) {
    auto& mc = c.model;
    m.get("uncertainty_loss", mc.uncertainty_loss);
    m.get("specific_experts", mc.specific_experts);
    m.get("attention_units", mc.attention_units);
    m.get("probability_transfer", mc.probability_transfer);
    m.get("single_task", mc.single_task);
    m.get("feature_refresh", mc.feature_refresh);
    m.get("expert_hidden", mc.expert_hidden);
    m.get("stage1_experts", mc.stage1_experts);
    m.get("stage2_shared", mc.stage2_shared);
    m.get("stage2_specific", mc.stage2_specific);
    m.get("tower_hidden", mc.tower_hidden);
    m.get("tower_dim", mc.tower_dim);
    m.get("dropout", mc.dropout);
    m.get("bn_momentum", mc.bn_momentum);
    m.get("bn_eps", mc.bn_eps);
    std::string readout(readout_name(mc.attention_readout));
    m.get("attention_readout", readout);
    if (readout == "position") {
      mc.attention_readout = model::AttentionReadout::position;
    } else if (readout == "mean") {
      mc.attention_readout = model::AttentionReadout::mean;
    } else {
      throw ContractError("config .model.attention_readout must be 'position' or 'mean'");
    }
  });
  r.child("loss", [&](Reader& l) {
    l.get("weights", c.loss.weights);
    l.get("impression_weighting", c.loss.impression_weighting);
  });
  r.child("train", [&](Reader& t) {
    auto& tc = c.train;
    t.get("max_epochs", tc.max_epochs);
    t.get("batch_size", tc.batch_size);
    t.get("patience", tc.patience);
    t.get("eval_batch", tc.eval_batch);
    t.child("adam", [&](Reader& a) {
      a.get("lr", tc.adam.lr);
      a.get("beta1", tc.adam.beta1);
      a.get("beta2", tc.adam.beta2);
      a.get("eps", tc.adam.eps);
    });
    t.get("seed", tc.seed);
    t.get("overfit_samples", tc.overfit_samples);
    t.get("overfit_steps", tc.overfit_steps);
    t.get("refresh_candidates", tc.refresh_candidates);
    t.get("refresh_probe_samples", tc.refresh_probe_samples);
  });
  r.child("bench", [&](Reader& b) {
    b.get("queries", c.bench.queries);
    b.get("candidates", c.bench.candidates);
    b.get("warmup", c.bench.warmup);
    b.get("repeats", c.bench.repeats);
  });
  r.get("ndcg_k", c.ndcg_k);
  r.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_json(config).dump(2) << '\n';
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

void apply_seed(RunConfig& config, std::uint64_t seed) {
  config.data.funnel.seed = seed;
  config.data.split.seed = seed;
  config.train.seed = seed;
}

}  // namespace mlpr::harness
