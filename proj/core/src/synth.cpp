#include "esam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace esam {

bool SynthWorld::is_relevant(std::int64_t query, std::int64_t item) const {
  const auto& rel = relevant[static_cast<std::size_t>(query)];
  return std::binary_search(rel.begin(), rel.end(), item);
}

double SynthWorld::oracle_score(std::int64_t query, std::int64_t item) const {
  const auto& q = query_factors[static_cast<std::size_t>(query)];
  const auto& d = item_factors[static_cast<std::size_t>(item)];
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * d[i];
  return s;
}

SynthWorld generate_world(const SynthConfig& cfg) {
  if (cfg.num_queries == 0 || cfg.num_items == 0 || cfg.latent_dim == 0)
    throw ConfigError("generate_world: sizes must be >= 1");
  if (cfg.relevant_per_query > cfg.num_items)
    throw ConfigError("generate_world: relevant_per_query exceeds item count");
  Rng rng(cfg.seed);
  SynthWorld w;
  w.cfg = cfg;

  w.query_factors.resize(cfg.num_queries, std::vector<double>(cfg.latent_dim));
  for (auto& q : w.query_factors)
    for (double& v : q) v = rng.normal();
  w.item_factors.resize(cfg.num_items, std::vector<double>(cfg.latent_dim));
  for (auto& d : w.item_factors)
    for (double& v : d) v = rng.normal();

  // popularity rank: at exposure_bias 0 a random permutation, otherwise
  // correlated with the first latent coordinate so the exposed slice of the
  // catalog is structurally different from the rest
  if (cfg.exposure_bias < 0.0 || cfg.exposure_bias > 1.0)
    throw ConfigError("generate_world: exposure_bias must be in [0,1]");
  std::vector<std::pair<double, std::size_t>> order(cfg.num_items);
  const double eb = cfg.exposure_bias;
  const double mix = std::sqrt(std::max(0.0, 1.0 - eb * eb));
  for (std::size_t i = 0; i < cfg.num_items; ++i)
    order[i] = {eb * w.item_factors[i][0] + mix * rng.normal(), i};
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  w.popularity.resize(cfg.num_items);
  for (std::size_t r = 0; r < cfg.num_items; ++r)
    w.popularity[order[r].second] = std::pow(static_cast<double>(r + 1), -cfg.alpha);

  // genre = dominant latent coordinate
  w.genre.resize(cfg.num_items);
  for (std::size_t i = 0; i < cfg.num_items; ++i) {
    const auto& d = w.item_factors[i];
    std::size_t best = 0;
    for (std::size_t c = 1; c < d.size(); ++c)
      if (d[c] > d[best]) best = c;
    w.genre[i] = static_cast<std::int64_t>(best);
  }

  // true relevance: top-quantile of factor dot products per query
  w.relevant.resize(cfg.num_queries);
  std::vector<std::pair<double, std::int64_t>> scored(cfg.num_items);
  for (std::size_t q = 0; q < cfg.num_queries; ++q) {
    for (std::size_t i = 0; i < cfg.num_items; ++i)
      scored[i] = {w.oracle_score(static_cast<std::int64_t>(q),
                                  static_cast<std::int64_t>(i)),
                   static_cast<std::int64_t>(i)};
    std::nth_element(scored.begin(), scored.begin() + cfg.relevant_per_query - 1,
                     scored.end(), [](const auto& a, const auto& b) {
                       if (a.first != b.first) return a.first > b.first;
                       return a.second < b.second;
                     });
    auto& rel = w.relevant[q];
    for (std::size_t i = 0; i < cfg.relevant_per_query; ++i)
      rel.push_back(scored[i].second);
    std::sort(rel.begin(), rel.end());
  }
  return w;
}

namespace {

// quintile bucket of a standard-normal latent coordinate
constexpr std::size_t kFactorBuckets = 5;

std::int64_t factor_bucket(double v) {
  if (v < -0.8416) return 0;
  if (v < -0.2533) return 1;
  if (v < 0.2533) return 2;
  if (v < 0.8416) return 3;
  return 4;
}

}  // namespace

InteractionLog emit_log(const SynthWorld& world, std::uint64_t seed) {
  const SynthConfig& cfg = world.cfg;
  Rng rng(seed);
  InteractionLog log;
  // queries: id field plus one bucketed latent coordinate per dimension
  log.query_field_vocab = {cfg.num_queries};
  // items: genre (the similarity field), bucketed latent coordinates, and the
  // item id itself. The id field lets a model overfit displayed items, which
  // is exactly the exposure-bias failure mode this toolkit is about; the
  // bucketed factors give it something that generalizes to the full catalog.
  log.item_field_vocab = {cfg.latent_dim};
  for (std::size_t c = 0; c < cfg.latent_dim; ++c) {
    log.query_field_vocab.push_back(kFactorBuckets);
    log.item_field_vocab.push_back(kFactorBuckets);
  }
  log.item_field_vocab.push_back(cfg.num_items);
  log.similarity_field = 0;

  log.catalog.resize(cfg.num_items);
  for (std::size_t i = 0; i < cfg.num_items; ++i) {
    auto& fields = log.catalog[i].fields;
    fields = {{world.genre[i]}};
    for (double v : world.item_factors[i]) fields.push_back({factor_bucket(v)});
    fields.push_back({static_cast<std::int64_t>(i)});
  }
  log.queries.resize(cfg.num_queries);
  for (std::size_t q = 0; q < cfg.num_queries; ++q) {
    auto& profile = log.queries[q].profile;
    profile = {static_cast<std::int64_t>(q)};
    for (double v : world.query_factors[q]) profile.push_back(factor_bucket(v));
  }

  // weighted sampling without replacement via exponential race
  std::vector<std::pair<double, std::int64_t>> keys(cfg.num_items);
  std::int64_t ts = 0;
  for (std::size_t q = 0; q < cfg.num_queries; ++q) {
    for (std::size_t i = 0; i < cfg.num_items; ++i) {
      double u;
      do {
        u = rng.uniform();
      } while (u <= 0.0);
      keys[i] = {-std::log(u) / world.popularity[i], static_cast<std::int64_t>(i)};
    }
    std::size_t n = std::min(cfg.impressions_per_query, cfg.num_items);
    std::nth_element(keys.begin(), keys.begin() + n - 1, keys.end());
    std::vector<std::int64_t> shown;
    for (std::size_t i = 0; i < n; ++i) shown.push_back(keys[i].second);
    std::sort(shown.begin(), shown.end());
    for (std::int64_t item : shown) {
      int label = world.is_relevant(static_cast<std::int64_t>(q), item) ? 1 : 0;
      if (cfg.label_noise > 0.0 && rng.uniform() < cfg.label_noise) label = 1 - label;
      log.records.push_back({static_cast<std::int64_t>(q), item, label, ts++});
    }
  }
  for (const Interaction& r : log.records)
    log.queries[static_cast<std::size_t>(r.query)].behavior.push_back(r.item);
  return log;
}

void write_synth_dataset(const SynthWorld& world, const InteractionLog& log,
                         const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir + "/" + name, std::ios::trunc);
    if (!f) throw IoError("cannot write " + dir + "/" + name);
    return f;
  };
  {
    auto f = open("log.tsv");
    for (const Interaction& r : log.records)
      f << r.query << '\t' << r.item << '\t' << r.label << '\t' << r.timestamp << '\n';
  }
  auto write_values = [](std::ofstream& f, const std::vector<std::int64_t>& vs) {
    for (std::size_t i = 0; i < vs.size(); ++i)
      f << (i == 0 ? "" : ",") << vs[i];
  };
  {
    auto f = open("items.tsv");
    for (std::size_t i = 0; i < log.catalog.size(); ++i) {
      f << i;
      for (const auto& vs : log.catalog[i].fields) {
        f << '\t';
        write_values(f, vs);
      }
      f << '\n';
    }
  }
  {
    auto f = open("queries.tsv");
    for (std::size_t q = 0; q < log.queries.size(); ++q) {
      f << q;
      for (std::int64_t v : log.queries[q].profile) f << '\t' << v;
      f << '\n';
    }
  }
  {
    auto f = open("truth.tsv");
    for (std::size_t q = 0; q < world.relevant.size(); ++q)
      for (std::int64_t item : world.relevant[q])
        f << q << '\t' << item << '\n';
  }
}

}  // namespace esam
