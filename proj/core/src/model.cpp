#include "esam/model.hpp"

#include <cmath>
#include <string>

#include "esam/rng.hpp"

namespace esam {

std::size_t TowerConfig::query_input_dim() const {
  std::size_t d = query_field_vocab.size() * embed_dim + embed_dim;  // + behavior
  if (keyword_vocab > 0) d += embed_dim;
  return d;
}

std::size_t TowerConfig::item_input_dim() const {
  return item_field_vocab.size() * embed_dim;
}

void TowerConfig::validate() const {
  if (hidden.empty() || hidden.back() == 0)
    throw ConfigError("TowerConfig: feature dim L must be > 0");
  if (embed_dim == 0) throw ConfigError("TowerConfig: embed_dim must be > 0");
  if (num_items == 0) throw ConfigError("TowerConfig: num_items must be > 0");
  if (item_field_vocab.empty())
    throw ConfigError("TowerConfig: need at least one item field");
  for (std::size_t v : query_field_vocab)
    if (v == 0) throw ConfigError("TowerConfig: zero query field vocab");
  for (std::size_t v : item_field_vocab)
    if (v == 0) throw ConfigError("TowerConfig: zero item field vocab");
}

std::vector<Tensor*> ModelParams::all() {
  std::vector<Tensor*> out;
  for (auto& t : query_field_embed) out.push_back(&t);
  out.push_back(&behavior_embed);
  if (!keyword_embed.empty()) out.push_back(&keyword_embed);
  for (auto& t : item_field_embed) out.push_back(&t);
  for (auto& l : query_mlp) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  for (auto& l : item_mlp) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  out.push_back(&item_bias);
  return out;
}

std::vector<const Tensor*> ModelParams::all() const {
  auto mut = const_cast<ModelParams*>(this)->all();
  return {mut.begin(), mut.end()};
}

namespace {

Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in,
                    Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

std::vector<DenseLayer> init_mlp(std::size_t in_dim,
                                 const std::vector<std::size_t>& widths,
                                 Rng& rng) {
  std::vector<DenseLayer> mlp;
  std::size_t in = in_dim;
  for (std::size_t w : widths) {
    DenseLayer l;
    l.w = uniform_init(in, w, in, rng);
    l.b = Tensor(1, w);
    mlp.push_back(std::move(l));
    in = w;
  }
  return mlp;
}

}  // namespace

ModelParams init_params(const TowerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  for (std::size_t v : cfg.query_field_vocab)
    p.query_field_embed.push_back(uniform_init(v, cfg.embed_dim, cfg.embed_dim, rng));
  p.behavior_embed = uniform_init(cfg.num_items, cfg.embed_dim, cfg.embed_dim, rng);
  if (cfg.keyword_vocab > 0)
    p.keyword_embed = uniform_init(cfg.keyword_vocab, cfg.embed_dim, cfg.embed_dim, rng);
  for (std::size_t v : cfg.item_field_vocab)
    p.item_field_embed.push_back(uniform_init(v, cfg.embed_dim, cfg.embed_dim, rng));
  p.query_mlp = init_mlp(cfg.query_input_dim(), cfg.hidden, rng);
  p.item_mlp = init_mlp(cfg.item_input_dim(), cfg.hidden, rng);
  p.item_bias = Tensor(cfg.num_items, 1);
  return p;
}

ParamNodes register_params(Graph& g, const ModelParams& params,
                           bool requires_grad) {
  ParamNodes pn;
  auto reg = [&](const Tensor& t) {
    Graph::NodeId id = g.leaf(t, requires_grad);
    pn.ids.push_back(id);
    return id;
  };
  for (const auto& t : params.query_field_embed)
    pn.query_field_embed.push_back(reg(t));
  pn.behavior_embed = reg(params.behavior_embed);
  if (!params.keyword_embed.empty()) {
    pn.keyword_embed = reg(params.keyword_embed);
    pn.has_keywords = true;
  }
  for (const auto& t : params.item_field_embed)
    pn.item_field_embed.push_back(reg(t));
  for (const auto& l : params.query_mlp) {
    Graph::NodeId w = reg(l.w);
    pn.query_mlp.emplace_back(w, reg(l.b));
  }
  for (const auto& l : params.item_mlp) {
    Graph::NodeId w = reg(l.w);
    pn.item_mlp.emplace_back(w, reg(l.b));
  }
  pn.item_bias = reg(params.item_bias);
  return pn;
}

namespace {

// relu between layers; the output (feature) layer stays linear so features
// can carry sign and the tower cannot be silenced by dead units alone
Graph::NodeId mlp_forward(Graph& g, Graph::NodeId x,
                          const std::vector<std::pair<Graph::NodeId, Graph::NodeId>>& mlp) {
  for (std::size_t i = 0; i < mlp.size(); ++i) {
    x = g.add(g.matmul(x, mlp[i].first), mlp[i].second);
    if (i + 1 < mlp.size()) x = g.relu(x);
  }
  return x;
}

// mean-pooled embedding of an id list; zero vector for an empty list
Graph::NodeId pooled_embed(Graph& g, Graph::NodeId table,
                           const std::vector<std::int64_t>& ids,
                           std::size_t dim) {
  if (ids.empty()) return g.leaf(Tensor(1, dim));
  return g.mean_rows(g.gather_rows(table, ids));
}

}  // namespace

Graph::NodeId embed_query(Graph& g, const ParamNodes& p, const TowerConfig& cfg,
                          const QueryInput& q) {
  if (q.profile.size() != cfg.query_field_vocab.size())
    throw DimensionError("embed_query: got " + std::to_string(q.profile.size()) +
                         " profile ids, config has " +
                         std::to_string(cfg.query_field_vocab.size()) + " fields");
  Graph::NodeId x = 0;
  bool first = true;
  for (std::size_t f = 0; f < q.profile.size(); ++f) {
    Graph::NodeId e = g.gather_rows(p.query_field_embed[f], {q.profile[f]});
    x = first ? e : g.concat_cols(x, e);
    first = false;
  }
  Graph::NodeId beh = pooled_embed(g, p.behavior_embed, q.behavior, cfg.embed_dim);
  x = first ? beh : g.concat_cols(x, beh);
  if (cfg.keyword_vocab > 0) {
    Graph::NodeId kw = pooled_embed(g, p.keyword_embed, q.keywords, cfg.embed_dim);
    x = g.concat_cols(x, kw);
  }
  x = mlp_forward(g, x, p.query_mlp);
  return cfg.normalize_output ? g.l2_normalize_rows(x) : x;
}

Graph::NodeId embed_items(Graph& g, const ParamNodes& p, const TowerConfig& cfg,
                          std::span<const ItemInput> items) {
  if (items.empty()) return g.leaf(Tensor(0, cfg.feature_dim()));
  std::size_t nf = cfg.item_field_vocab.size();
  Graph::NodeId x = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    bool all_single = true;
    for (const auto& it : items) {
      if (it.fields.size() != nf)
        throw DimensionError("embed_items: item has " +
                             std::to_string(it.fields.size()) + " fields, config has " +
                             std::to_string(nf));
      if (it.fields[f].size() != 1) all_single = false;
    }
    Graph::NodeId col;
    if (all_single) {
      std::vector<std::int64_t> ids;
      ids.reserve(items.size());
      for (const auto& it : items) ids.push_back(it.fields[f][0]);
      col = g.gather_rows(p.item_field_embed[f], std::move(ids));
    } else {
      col = pooled_embed(g, p.item_field_embed[f], items[0].fields[f], cfg.embed_dim);
      for (std::size_t i = 1; i < items.size(); ++i)
        col = g.concat_rows(col, pooled_embed(g, p.item_field_embed[f],
                                              items[i].fields[f], cfg.embed_dim));
    }
    x = (f == 0) ? col : g.concat_cols(x, col);
  }
  x = mlp_forward(g, x, p.item_mlp);
  return cfg.normalize_output ? g.l2_normalize_rows(x) : x;
}

Graph::NodeId embed_item(Graph& g, const ParamNodes& p, const TowerConfig& cfg,
                         const ItemInput& d) {
  return embed_items(g, p, cfg, std::span<const ItemInput>(&d, 1));
}

Graph::NodeId score_dot_sigmoid(Graph& g, Graph::NodeId vq, Graph::NodeId items,
                                Graph::NodeId bias_col) {
  if (g.value(vq).cols() != g.value(items).cols())
    throw DimensionError("score_dot_sigmoid: feature dims differ");
  Graph::NodeId raw = g.matmul(vq, g.transpose(items));
  raw = g.add(raw, g.transpose(bias_col));
  return g.sigmoid(raw);
}

Graph::NodeId score_cosine(Graph& g, Graph::NodeId vq, Graph::NodeId items) {
  if (g.value(vq).cols() != g.value(items).cols())
    throw DimensionError("score_cosine: feature dims differ");
  return g.matmul(g.l2_normalize_rows(vq),
                  g.transpose(g.l2_normalize_rows(items)));
}

Graph::NodeId to_probability(Graph& g, Graph::NodeId raw, ScoringKind kind) {
  if (kind == ScoringKind::kDotSigmoid) return raw;
  return g.scalar_affine(raw, 0.5, 0.5);
}

double to_probability(double raw, ScoringKind kind) {
  if (kind == ScoringKind::kDotSigmoid) return raw;
  return 0.5 * (raw + 1.0);
}

}  // namespace esam
