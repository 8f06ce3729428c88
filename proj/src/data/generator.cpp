#include "mlpr/data/generator.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <string_view>
#include <thread>

#include "mlpr/error.hpp"
#include "mlpr/util/seed.hpp"

namespace mlpr::data {

namespace {

constexpr std::size_t kBlockQueries = 32;
constexpr std::size_t kVocabularyPerTopic = 24;
constexpr std::size_t kBrandsPerTopic = 5;
constexpr double kCentroidScale = 0.7;
constexpr double kLatentNoise = 0.3;
constexpr double kQueryColorRate = 0.3;

constexpr std::string_view kColors[] = {"red",   "blue",  "green",  "black",  "white",
                                        "gray",  "brown", "pink",   "yellow", "purple"};
constexpr std::string_view kGenders[] = {"men", "women", "unisex", "kids"};
constexpr std::string_view kTypes[] = {"bed",   "shoe",   "lamp", "sofa",   "shirt", "phone",
                                       "kettle", "desk",  "jacket", "watch", "bag",   "rug"};

// Stream ids for derive_seed.
enum Stream : std::uint64_t { kWorldStream = 0, kItemStream = 1, kFirstBlockStream = 16 };

using Vec = std::vector<double>;

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::string make_word(std::mt19937_64& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::uniform_int_distribution<std::size_t> c(0, consonants.size() - 1), v(0, vowels.size() - 1);
  const int syllables = std::uniform_int_distribution<int>(2, 3)(rng);
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += consonants[c(rng)];
    w += vowels[v(rng)];
  }
  return w;
}

Vec gaussian(std::size_t d, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(d);
  for (double& x : v) x = n(rng);
  return v;
}

struct Topic {
  std::string type;
  Vec centroid;
  std::vector<std::string> words;
  std::vector<Vec> word_latents;
  std::vector<std::string> brands;
};

struct Item {
  std::size_t topic = 0;
  std::string id, title, type, brand, color, gender;
  Vec latent;
};

// Latent of a text: topic centroid plus the mean latent of its topic words,
// plus isotropic noise, so the text carries most of the latent signal.
Vec text_latent(const Topic& topic, const std::vector<std::size_t>& words, std::mt19937_64& rng) {
  Vec v = topic.centroid;
  for (std::size_t w : words) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] += topic.word_latents[w][j] / static_cast<double>(words.size());
    }
  }
  const Vec noise = gaussian(v.size(), kLatentNoise, rng);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] += noise[j];
  return v;
}

std::vector<std::size_t> sample_words(std::size_t lo, std::size_t hi, std::mt19937_64& rng) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  std::vector<std::size_t> out(n);
  for (auto& w : out) w = std::uniform_int_distribution<std::size_t>(0, kVocabularyPerTopic - 1)(rng);
  return out;
}

std::string join_words(const Topic& topic, const std::vector<std::size_t>& words) {
  std::string s;
  for (std::size_t w : words) {
    if (!s.empty()) s += ' ';
    s += topic.words[w];
  }
  return s;
}

std::string padded_id(char prefix, std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return prefix + digits;
}

struct World {
  std::vector<Topic> topics;
  std::vector<Item> items;
  std::vector<std::vector<std::size_t>> items_by_topic;
};

World build_world(const FunnelParams& p) {
  World world;
  std::mt19937_64 rng(derive_seed(p.seed, kWorldStream));
  for (std::size_t t = 0; t < p.n_topics; ++t) {
    Topic topic;
    topic.type = t < std::size(kTypes) ? std::string(kTypes[t]) : make_word(rng);
    topic.centroid = gaussian(p.latent_dim, kCentroidScale, rng);
    for (std::size_t w = 0; w < kVocabularyPerTopic; ++w) {
      topic.words.push_back(make_word(rng));
      topic.word_latents.push_back(gaussian(p.latent_dim, 1.0, rng));
    }
    for (std::size_t b = 0; b < kBrandsPerTopic; ++b) topic.brands.push_back(make_word(rng));
    world.topics.push_back(std::move(topic));
  }

  std::mt19937_64 item_rng(derive_seed(p.seed, kItemStream));
  world.items_by_topic.resize(p.n_topics);
  for (std::size_t i = 0; i < p.n_items; ++i) {
    Item item;
    item.topic = std::uniform_int_distribution<std::size_t>(0, p.n_topics - 1)(item_rng);
    const Topic& topic = world.topics[item.topic];
    const auto words = sample_words(2, 4, item_rng);
    item.id = padded_id('i', i);
    item.title = join_words(topic, words);
    item.type = topic.type;
    item.brand = pick(topic.brands, item_rng);
    item.color = std::string(kColors[std::uniform_int_distribution<std::size_t>(
        0, std::size(kColors) - 1)(item_rng)]);
    item.gender = std::string(kGenders[std::uniform_int_distribution<std::size_t>(
        0, std::size(kGenders) - 1)(item_rng)]);
    item.latent = text_latent(topic, words, item_rng);
    world.items_by_topic[item.topic].push_back(i);
    world.items.push_back(std::move(item));
  }
  return world;
}

// Uniform sample of `k` distinct entries of `pool` not already in `taken`.
void sample_without_replacement(const std::vector<std::size_t>& pool, std::size_t k,
                                std::vector<char>& taken, std::vector<std::size_t>& out,
                                std::mt19937_64& rng) {
  std::vector<std::size_t> free;
  for (std::size_t i : pool) {
    if (!taken[i]) free.push_back(i);
  }
  k = std::min(k, free.size());
  for (std::size_t j = 0; j < k; ++j) {
    std::swap(free[j], free[std::uniform_int_distribution<std::size_t>(j, free.size() - 1)(rng)]);
    taken[free[j]] = 1;
    out.push_back(free[j]);
  }
}

std::vector<EngagementRecord> generate_block(const FunnelParams& p, const World& world,
                                             const std::vector<std::size_t>& all_items,
                                             std::size_t block) {
  std::mt19937_64 rng(derive_seed(p.seed, kFirstBlockStream + block));
  std::vector<EngagementRecord> out;
  const std::size_t first = block * kBlockQueries;
  const std::size_t last = std::min(p.n_queries, first + kBlockQueries);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(p.latent_dim));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::poisson_distribution<std::uint32_t> poisson(p.poisson_mean);

  for (std::size_t q = first; q < last; ++q) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, p.n_topics - 1)(rng);
    const Topic& topic = world.topics[t];
    const auto words = sample_words(1, 3, rng);
    std::string text = join_words(topic, words);
    std::string_view query_color;
    if (std::bernoulli_distribution(kQueryColorRate)(rng)) {
      query_color = kColors[std::uniform_int_distribution<std::size_t>(0, std::size(kColors) - 1)(rng)];
      text = std::string(query_color) + " " + text;
    }
    const Vec u = text_latent(topic, words, rng);

    std::vector<char> taken(p.n_items, 0);
    std::vector<std::size_t> candidates;
    const auto same_topic = static_cast<std::size_t>(
        std::llround(p.same_topic_fraction * static_cast<double>(p.items_per_query)));
    sample_without_replacement(world.items_by_topic[t], same_topic, taken, candidates, rng);
    sample_without_replacement(all_items, p.items_per_query - candidates.size(), taken, candidates,
                               rng);

    for (std::size_t i : candidates) {
      const Item& item = world.items[i];
      double dot = 0.0;
      for (std::size_t j = 0; j < p.latent_dim; ++j) dot += u[j] * item.latent[j];
      const double logit = p.relevance_scale * dot * inv_sqrt_d +
                           (!query_color.empty() && item.color == query_color ? p.color_bonus : 0.0);
      const double s = sigmoid(logit);
      GroundTruth truth{sigmoid(p.links[0].a * s + p.links[0].b),
                        sigmoid(p.links[1].a * s + p.links[1].b),
                        sigmoid(p.links[2].a * s + p.links[2].b)};

      EngagementRecord r;
      r.query_id = padded_id('q', q);
      r.item_id = item.id;
      r.query_text = text;
      r.item_title = item.title;
      r.item_type = item.type;
      r.item_brand = item.brand;
      r.item_color = item.color;
      r.item_gender = item.gender;
      r.impressions = 1 + poisson(rng);
      r.clicks = std::binomial_distribution<std::uint32_t>(r.impressions, truth.p_click)(rng);
      r.atcs = std::binomial_distribution<std::uint32_t>(r.clicks, truth.p_atc)(rng);
      r.purchases = std::binomial_distribution<std::uint32_t>(r.atcs, truth.p_purchase)(rng);
      r.ranking_features.resize(p.n_ranking_features);
      for (std::size_t f = 0; f < p.n_ranking_features; ++f) {
        r.ranking_features[f] =
            f < p.informative_features ? logit + p.feature_noise * 2.0 * unit(rng) : unit(rng);
      }
      if (p.with_ground_truth) r.truth = truth;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

void FunnelParams::validate() const {
  if (n_queries < 1 || n_items < 1 || latent_dim < 1 || n_topics < 1 || items_per_query < 1) {
    throw ContractError("funnel counts must be at least 1");
  }
  if (items_per_query > n_items) {
    throw ContractError("items_per_query (" + std::to_string(items_per_query) +
                        ") exceeds n_items (" + std::to_string(n_items) + ")");
  }
  if (!(poisson_mean > 0.0)) throw ContractError("poisson_mean must be positive");
  if (!(same_topic_fraction >= 0.0 && same_topic_fraction <= 1.0)) {
    throw ContractError("same_topic_fraction must be in [0, 1]");
  }
  if (informative_features > n_ranking_features) {
    throw ContractError("informative_features exceeds n_ranking_features");
  }
  if (!(feature_noise >= 0.0)) throw ContractError("feature_noise must be nonnegative");
}

std::size_t worker_count() {
  if (const char* env = std::getenv("MLPR_THREADS")) {
    std::size_t n = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc() && ptr == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<EngagementRecord> generate(const FunnelParams& params) {
  params.validate();
  const World world = build_world(params);
  std::vector<std::size_t> all_items(params.n_items);
  for (std::size_t i = 0; i < all_items.size(); ++i) all_items[i] = i;

  const std::size_t blocks = (params.n_queries + kBlockQueries - 1) / kBlockQueries;
  std::vector<std::vector<EngagementRecord>> parts(blocks);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t b = next++; b < blocks; b = next++) {
      parts[b] = generate_block(params, world, all_items, b);
    }
  };
  const std::size_t workers = std::min(worker_count(), blocks);
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();

  std::vector<EngagementRecord> out;
  out.reserve(params.n_queries * params.items_per_query);
  for (auto& part : parts) std::move(part.begin(), part.end(), std::back_inserter(out));
  return out;
}

std::vector<EngagementRecord> filter_min_impressions(std::vector<EngagementRecord> records,
                                                     std::uint32_t threshold) {
  std::erase_if(records, [threshold](const EngagementRecord& r) { return r.impressions <= threshold; });
  return records;
}

}  // namespace mlpr::data
