#include "esam/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace esam {

TowerConfig make_tower_config(const RunConfig& cfg, const InteractionLog& log) {
  TowerConfig t;
  t.query_field_vocab = log.query_field_vocab;
  t.item_field_vocab = log.item_field_vocab;
  t.num_items = log.num_items();
  t.embed_dim = cfg.embed_dim;
  t.hidden = cfg.hidden;
  t.normalize_output = cfg.normalize_features;
  t.validate();
  return t;
}

namespace {

struct BatchLoss {
  double l_s = 0.0, l_da = 0.0, l_dcc = 0.0, l_dcp = 0.0, total = 0.0;
};

std::vector<ItemInput> items_of(const InteractionLog& log,
                                const std::vector<std::int64_t>& ids) {
  std::vector<ItemInput> out;
  out.reserve(ids.size());
  for (std::int64_t id : ids) out.push_back(log.catalog[static_cast<std::size_t>(id)]);
  return out;
}

Graph::NodeId scored_probs(Graph& g, const ParamNodes& pn, ScoringKind scoring,
                           Graph::NodeId vq, Graph::NodeId feats,
                           const std::vector<std::int64_t>& item_ids) {
  if (scoring == ScoringKind::kDotSigmoid) {
    Graph::NodeId bias = g.gather_rows(pn.item_bias, item_ids);
    return score_dot_sigmoid(g, vq, feats, bias);
  }
  return to_probability(g, score_cosine(g, vq, feats), scoring);
}

// One mini-batch: build the graph over all examples, average per-query
// components, run backward and an optimizer step.
BatchLoss run_batch(const RunConfig& cfg, const TowerConfig& tower,
                    const InteractionLog& log,
                    std::span<const TrainingExample> batch, ModelParams& params,
                    AdamOptimizer* adam) {
  Graph g;
  ParamNodes pn = register_params(g, params, /*requires_grad=*/true);
  ScoringKind scoring = cfg.scoring();
  const LossConfig& lc = cfg.loss;
  bool use_targets = lc.lambda1 > 0 || lc.lambda3 > 0;

  Graph::NodeId zero = g.leaf(Tensor(1, 1, 0.0));
  Graph::NodeId sum_ls = zero, sum_da = zero, sum_dcc = zero, sum_dcp = zero;
  for (const TrainingExample& ex : batch) {
    Graph::NodeId vq = embed_query(
        g, pn, tower, log.queries[static_cast<std::size_t>(ex.query)]);
    std::vector<ItemInput> src = items_of(log, ex.source_items);
    Graph::NodeId ds = embed_items(g, pn, tower, src);
    Graph::NodeId probs_s = scored_probs(g, pn, scoring, vq, ds, ex.source_items);
    sum_ls = g.add(sum_ls, loss_pointwise_ce(g, probs_s, ex.source_labels));
    if (lc.lambda2 > 0)
      sum_dcc = g.add(sum_dcc, loss_center_clustering(g, ds, ex.source_labels, lc));
    if (use_targets) {
      std::vector<ItemInput> tgt = items_of(log, ex.target_items);
      Graph::NodeId dt = embed_items(g, pn, tower, tgt);
      if (lc.lambda1 > 0) sum_da = g.add(sum_da, loss_a2c(g, ds, dt));
      if (lc.lambda3 > 0) {
        Graph::NodeId probs_t = scored_probs(g, pn, scoring, vq, dt, ex.target_items);
        sum_dcp = g.add(sum_dcp, loss_self_training(g, probs_t, lc));
      }
    }
  }
  double inv = 1.0 / static_cast<double>(batch.size());
  Graph::NodeId ls = g.scalar_affine(sum_ls, inv, 0.0);
  Graph::NodeId da = g.scalar_affine(sum_da, inv, 0.0);
  Graph::NodeId dcc = g.scalar_affine(sum_dcc, inv, 0.0);
  Graph::NodeId dcp = g.scalar_affine(sum_dcp, inv, 0.0);
  Graph::NodeId total = loss_total(g, ls, da, dcc, dcp, lc);
  g.backward(total);

  std::vector<Tensor*> ptrs = params.all();
  std::vector<Tensor> grads;
  grads.reserve(ptrs.size());
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    Graph::NodeId id = pn.ids[i];
    // params untouched by this batch get a zero gradient
    if (g.has_grad(id))
      grads.push_back(g.grad(id));
    else
      grads.emplace_back(ptrs[i]->rows(), ptrs[i]->cols());
  }
  std::vector<const Tensor*> gptrs;
  for (const Tensor& t : grads) gptrs.push_back(&t);
  if (adam)
    adam->step(ptrs, gptrs);
  else
    sgd_step(ptrs, gptrs, cfg.learning_rate);

  return {g.scalar(ls), g.scalar(da), g.scalar(dcc), g.scalar(dcp),
          g.scalar(total)};
}

}  // namespace

TrainResult train_model(const RunConfig& cfg, const InteractionLog& log,
                        const Split& split, std::ostream* log_stream) {
  cfg.validate();
  TowerConfig tower = make_tower_config(cfg, log);
  ModelParams params = init_params(tower, cfg.seed);
  std::optional<AdamOptimizer> adam;
  if (cfg.optimizer == "adam")
    adam.emplace(AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.grad_clip});

  SimilarityIndex sim(log);
  DisplayFrequencyIndex freq = build_display_frequency(split.train, log.num_items());

  if (log_stream)
    *log_stream << "model=" << (cfg.is_base_model() ? "BaseModel" : "ESAM")
                << " mode=" << cfg.mode << " seed=" << cfg.seed << "\n";

  TrainResult result;
  result.tower = tower;
  result.best_params = params;
  double best = -1.0;
  int since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<TrainingExample> examples =
        make_epoch(log, split.train, sim, cfg.n_items, cfg.seed, epoch);
    Rng order_rng(Rng::mix(cfg.seed, Rng::mix(0x0bacce55, epoch)));
    order_rng.shuffle(examples);

    BatchLoss acc;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < examples.size(); start += cfg.batch_size) {
      std::size_t n = std::min(cfg.batch_size, examples.size() - start);
      BatchLoss b = run_batch(cfg, tower, log,
                              std::span<const TrainingExample>(examples).subspan(start, n),
                              params, adam ? &*adam : nullptr);
      acc.l_s += b.l_s;
      acc.l_da += b.l_da;
      acc.l_dcc += b.l_dcc;
      acc.l_dcp += b.l_dcp;
      acc.total += b.total;
      ++batches;
    }
    double inv = batches > 0 ? 1.0 / static_cast<double>(batches) : 0.0;

    EvalSetup setup{&params, &tower, cfg.scoring(), &log, cfg.k};
    SlicedMetrics val = evaluate_sliced(setup, split.val, split.train, freq);

    EpochLog el{epoch,        acc.l_s * inv,  acc.l_da * inv, acc.l_dcc * inv,
                acc.l_dcp * inv, acc.total * inv, val.entire.mean.ndcg};
    result.epochs.push_back(el);
    if (log_stream) {
      std::ostringstream os;
      os << std::setprecision(6) << "epoch=" << el.epoch << " L_s=" << el.l_s
         << " L_DA=" << el.l_da << " L_DCc=" << el.l_dc_center
         << " L_DCp=" << el.l_dc_pseudo << " total=" << el.total
         << " val_ndcg" << cfg.k << "=" << el.val_ndcg;
      *log_stream << os.str() << "\n";
    }

    if (el.val_ndcg > best) {
      best = el.val_ndcg;
      since_best = 0;
      result.best_params = params;
      result.best_adam = adam;
      result.best_val_ndcg = best;
      result.best_epoch = epoch;
    } else if (++since_best >= cfg.patience) {
      if (log_stream)
        *log_stream << "early stop at epoch " << epoch << " (best epoch "
                    << result.best_epoch << ")\n";
      break;
    }
  }
  result.final_params = params;
  return result;
}

}  // namespace esam
