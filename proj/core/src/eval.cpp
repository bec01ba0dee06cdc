#include "esam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace esam {

RankedList make_ranked(std::int64_t query,
                       const std::vector<std::int64_t>& items,
                       const std::vector<double>& scores,
                       std::vector<std::int64_t> relevant) {
  if (items.size() != scores.size())
    throw DimensionError("make_ranked: " + std::to_string(items.size()) +
                         " items vs " + std::to_string(scores.size()) + " scores");
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  });
  RankedList out;
  out.query = query;
  out.items.reserve(items.size());
  for (std::size_t i : order) out.items.push_back(items[i]);
  std::sort(relevant.begin(), relevant.end());
  out.relevant = std::move(relevant);
  return out;
}

double ndcg_at_k(const RankedList& ranked, std::size_t k) {
  if (k == 0) throw ConfigError("ndcg_at_k: k must be >= 1");
  if (ranked.relevant.empty()) return 0.0;
  double dcg = 0.0;
  std::size_t top = std::min(k, ranked.items.size());
  for (std::size_t i = 0; i < top; ++i)
    if (ranked.is_relevant(ranked.items[i]))
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  std::size_t ideal = std::min(k, ranked.relevant.size());
  for (std::size_t i = 0; i < ideal; ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

double recall_at_k(const RankedList& ranked, std::size_t k) {
  if (k == 0) throw ConfigError("recall_at_k: k must be >= 1");
  if (ranked.relevant.empty()) return 0.0;
  std::size_t hits = 0;
  std::size_t top = std::min(k, ranked.items.size());
  for (std::size_t i = 0; i < top; ++i)
    if (ranked.is_relevant(ranked.items[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ranked.relevant.size());
}

double average_precision(const RankedList& ranked) {
  if (ranked.relevant.empty()) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.items.size(); ++i)
    if (ranked.is_relevant(ranked.items[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  return sum / static_cast<double>(ranked.relevant.size());
}

Tensor forward_item_features(const ModelParams& params, const TowerConfig& cfg,
                             std::span<const ItemInput> items,
                             std::size_t chunk) {
  Tensor out(items.size(), cfg.feature_dim());
  for (std::size_t start = 0; start < items.size(); start += chunk) {
    std::size_t n = std::min(chunk, items.size() - start);
    Graph g;
    ParamNodes pn = register_params(g, params, /*requires_grad=*/false);
    Graph::NodeId feats = embed_items(g, pn, cfg, items.subspan(start, n));
    const Tensor& f = g.value(feats);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < cfg.feature_dim(); ++c)
        out.at(start + r, c) = f.at(r, c);
  }
  return out;
}

Tensor forward_query_feature(const ModelParams& params, const TowerConfig& cfg,
                             const QueryInput& q) {
  Graph g;
  ParamNodes pn = register_params(g, params, /*requires_grad=*/false);
  return g.value(embed_query(g, pn, cfg, q));
}

namespace {

double dot_row(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(ra, c) * b.at(rb, c);
  return s;
}

double row_norm(const Tensor& a, std::size_t r) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(r, c) * a.at(r, c);
  return std::sqrt(s);
}

// raw ranking score of query feature vq against catalog feature row i
double raw_score(const EvalSetup& setup, const Tensor& vq, const Tensor& feats,
                 std::size_t i) {
  if (setup.scoring == ScoringKind::kDotSigmoid)
    return setup.params->item_bias.at(i, 0) + dot_row(vq, 0, feats, i);
  double nq = row_norm(vq, 0);
  double ni = row_norm(feats, i);
  if (nq <= 1e-12 || ni <= 1e-12)
    throw DomainError("score_cosine: zero-norm feature");
  return dot_row(vq, 0, feats, i) / (nq * ni);
}

MetricTriple metrics_of(const RankedList& r, std::size_t k) {
  return {ndcg_at_k(r, k), recall_at_k(r, k), average_precision(r)};
}

void finish_slice(SliceReport& s) {
  MetricTriple sum;
  for (const auto& [q, m] : s.per_query) {
    sum.ndcg += m.ndcg;
    sum.recall += m.recall;
    sum.map += m.map;
  }
  double n = static_cast<double>(s.per_query.size());
  if (n > 0) s.mean = {sum.ndcg / n, sum.recall / n, sum.map / n};
}

}  // namespace

SlicedMetrics evaluate_sliced(const EvalSetup& setup,
                              const std::vector<Interaction>& eval_records,
                              const std::vector<Interaction>& train_records,
                              const DisplayFrequencyIndex& freq) {
  const InteractionLog& log = *setup.log;
  std::size_t num_items = log.num_items();
  if (num_items == 0) throw DataError("evaluate_sliced: empty catalog");

  std::map<std::int64_t, std::vector<std::int64_t>> positives;
  for (const Interaction& r : eval_records)
    if (r.label == 1) positives[r.query].push_back(r.item);
  std::unordered_map<std::int64_t, std::unordered_set<std::int64_t>> train_pos;
  for (const Interaction& r : train_records)
    if (r.label == 1) train_pos[r.query].insert(r.item);

  Tensor feats = forward_item_features(*setup.params, *setup.cfg, log.catalog);

  SlicedMetrics out;
  out.k = setup.k;
  std::vector<std::int64_t> cand;
  std::vector<double> scores;
  for (auto& [qid, rel] : positives) {
    std::sort(rel.begin(), rel.end());
    rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
    Tensor vq = forward_query_feature(*setup.params, *setup.cfg,
                                      log.queries[static_cast<std::size_t>(qid)]);
    const auto* excl = train_pos.count(qid) ? &train_pos[qid] : nullptr;
    cand.clear();
    scores.clear();
    for (std::size_t i = 0; i < num_items; ++i) {
      if (excl && excl->count(static_cast<std::int64_t>(i))) continue;
      cand.push_back(static_cast<std::int64_t>(i));
      scores.push_back(raw_score(setup, vq, feats, i));
    }
    if (cand.empty()) throw DataError("evaluate_sliced: empty candidate pool");

    auto eval_slice = [&](SliceReport& report, auto keep) {
      std::vector<std::int64_t> c;
      std::vector<double> s;
      std::vector<std::int64_t> r;
      for (std::size_t i = 0; i < cand.size(); ++i)
        if (keep(cand[i])) {
          c.push_back(cand[i]);
          s.push_back(scores[i]);
        }
      for (std::int64_t item : rel)
        if (keep(item)) r.push_back(item);
      if (r.empty()) return;  // no relevant items in this slice for this query
      RankedList ranked = make_ranked(qid, c, s, std::move(r));
      report.per_query.emplace_back(qid, metrics_of(ranked, setup.k));
    };
    eval_slice(out.entire, [](std::int64_t) { return true; });
    eval_slice(out.hot, [&](std::int64_t i) { return freq.is_hot(i); });
    eval_slice(out.long_tail, [&](std::int64_t i) { return !freq.is_hot(i); });
  }
  finish_slice(out.entire);
  finish_slice(out.hot);
  finish_slice(out.long_tail);
  return out;
}

double a2c_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("a2c_distance: shapes differ");
  std::size_t L = a.cols();
  double acc = 0.0;
  for (std::size_t j = 0; j < L; ++j)
    for (std::size_t k = 0; k < L; ++k) {
      double gs = 0.0, gt = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) {
        gs += a.at(r, j) * a.at(r, k);
        gt += b.at(r, j) * b.at(r, k);
      }
      double d = gs - gt;
      acc += d * d;
    }
  return acc / (static_cast<double>(L) * static_cast<double>(L));
}

namespace {

Tensor gather_feature_rows(const Tensor& feats, const std::vector<std::int64_t>& ids) {
  Tensor out(ids.size(), feats.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t c = 0; c < feats.cols(); ++c)
      out.at(i, c) = feats.at(static_cast<std::size_t>(ids[i]), c);
  return out;
}

// items never displayed in train (the target domain at its purest); topped up
// with the least-displayed items when there are not enough
std::vector<std::int64_t> non_displayed_pool(
    const std::vector<Interaction>& train_records, std::size_t num_items,
    std::size_t want, Rng& rng) {
  std::vector<std::int64_t> counts(num_items, 0);
  for (const Interaction& r : train_records)
    ++counts[static_cast<std::size_t>(r.item)];
  std::vector<std::int64_t> pool;
  for (std::size_t i = 0; i < num_items; ++i)
    if (counts[i] == 0) pool.push_back(static_cast<std::int64_t>(i));
  rng.shuffle(pool);
  if (pool.size() < want) {
    std::vector<std::int64_t> rest;
    for (std::size_t i = 0; i < num_items; ++i)
      if (counts[i] > 0) rest.push_back(static_cast<std::int64_t>(i));
    std::sort(rest.begin(), rest.end(), [&](std::int64_t a, std::int64_t b) {
      if (counts[a] != counts[b]) return counts[a] < counts[b];
      return a < b;
    });
    for (std::int64_t i : rest) {
      if (pool.size() >= want) break;
      pool.push_back(i);
    }
  }
  return pool;
}

}  // namespace

DomainDistances domain_distance(const EvalSetup& setup,
                                const std::vector<Interaction>& train_records,
                                std::size_t batch_size, std::uint64_t seed) {
  const InteractionLog& log = *setup.log;
  Rng rng(seed);
  // two disjoint batches from each domain must fit into the log and catalog
  batch_size = std::min({batch_size, train_records.size() / 2, log.num_items() / 2});
  if (batch_size == 0)
    throw DataError("domain_distance: not enough records or items for two batches");

  std::vector<std::size_t> rec_idx(train_records.size());
  for (std::size_t i = 0; i < rec_idx.size(); ++i) rec_idx[i] = i;
  rng.shuffle(rec_idx);
  std::vector<std::int64_t> src1, src2;
  for (std::size_t i = 0; i < batch_size; ++i) {
    src1.push_back(train_records[rec_idx[i]].item);
    src2.push_back(train_records[rec_idx[batch_size + i]].item);
  }

  std::vector<std::int64_t> pool =
      non_displayed_pool(train_records, log.num_items(), 2 * batch_size, rng);
  if (pool.size() < 2 * batch_size)
    throw DataError("domain_distance: not enough target items for two batches");
  std::vector<std::int64_t> tgt1(pool.begin(), pool.begin() + batch_size);
  std::vector<std::int64_t> tgt2(pool.begin() + batch_size,
                                 pool.begin() + 2 * batch_size);

  Tensor feats = forward_item_features(*setup.params, *setup.cfg, log.catalog);
  DomainDistances d;
  d.src_src = a2c_distance(gather_feature_rows(feats, src1),
                           gather_feature_rows(feats, src2));
  d.tgt_tgt = a2c_distance(gather_feature_rows(feats, tgt1),
                           gather_feature_rows(feats, tgt2));
  d.src_tgt = a2c_distance(gather_feature_rows(feats, src1),
                           gather_feature_rows(feats, tgt1));
  return d;
}

void export_diagnostics(const EvalSetup& setup,
                        const std::vector<Interaction>& train_records,
                        const std::string& out_dir, std::uint64_t seed) {
  const InteractionLog& log = *setup.log;
  const TowerConfig& cfg = *setup.cfg;
  std::filesystem::create_directories(out_dir);
  Rng rng(seed);

  Tensor feats = forward_item_features(*setup.params, cfg, log.catalog);
  std::vector<std::int64_t> counts(log.num_items(), 0);
  for (const Interaction& r : train_records)
    ++counts[static_cast<std::size_t>(r.item)];

  auto open = [&](const std::string& name) {
    std::ofstream f(out_dir + "/" + name, std::ios::trunc);
    if (!f) throw IoError("cannot write " + out_dir + "/" + name);
    f << std::setprecision(17);
    return f;
  };

  // (a) score histogram: 500 query-item pairs per domain, 20 bins over [0,1]
  {
    constexpr std::size_t kPairs = 500;
    constexpr std::size_t kBins = 20;
    std::vector<std::int64_t> src_bins(kBins, 0), tgt_bins(kBins, 0);
    std::unordered_map<std::int64_t, std::unordered_set<std::int64_t>> shown;
    for (const Interaction& r : train_records) shown[r.query].insert(r.item);
    std::unordered_map<std::int64_t, Tensor> vq_cache;
    auto query_feat = [&](std::int64_t q) -> const Tensor& {
      auto it = vq_cache.find(q);
      if (it == vq_cache.end())
        it = vq_cache.emplace(q, forward_query_feature(*setup.params, cfg,
                                  log.queries[static_cast<std::size_t>(q)])).first;
      return it->second;
    };
    auto bin_of = [&](double p) {
      auto b = static_cast<std::size_t>(p * kBins);
      return std::min(b, kBins - 1);
    };
    for (std::size_t i = 0; i < kPairs; ++i) {
      const Interaction& r = train_records[rng.uniform_index(train_records.size())];
      double p = to_probability(raw_score(setup, query_feat(r.query), feats,
                                          static_cast<std::size_t>(r.item)),
                                setup.scoring);
      ++src_bins[bin_of(p)];
    }
    for (std::size_t i = 0; i < kPairs; ++i) {
      std::int64_t q, item;
      do {
        q = static_cast<std::int64_t>(rng.uniform_index(log.num_queries()));
        item = static_cast<std::int64_t>(rng.uniform_index(log.num_items()));
      } while (shown.count(q) && shown[q].count(item));
      double p = to_probability(raw_score(setup, query_feat(q), feats,
                                          static_cast<std::size_t>(item)),
                                setup.scoring);
      ++tgt_bins[bin_of(p)];
    }
    auto f = open("score_histogram.tsv");
    f << "bin_lo\tbin_hi\tsource\ttarget\n";
    for (std::size_t b = 0; b < kBins; ++b)
      f << static_cast<double>(b) / kBins << '\t'
        << static_cast<double>(b + 1) / kBins << '\t' << src_bins[b] << '\t'
        << tgt_bins[b] << '\n';
  }

  // (b) cross-group cosine between per-category centers
  {
    constexpr std::size_t kGroupCap = 500;
    std::size_t field = log.similarity_field;
    std::size_t n_vals = log.item_field_vocab[field];
    std::vector<std::vector<std::int64_t>> by_val(n_vals);
    for (std::size_t i = 0; i < log.num_items(); ++i)
      for (std::int64_t v : log.catalog[i].fields[field])
        by_val[static_cast<std::size_t>(v)].push_back(static_cast<std::int64_t>(i));
    std::vector<std::size_t> usable;
    std::vector<Tensor> center0, center1;
    for (std::size_t v = 0; v < n_vals; ++v) {
      auto items = by_val[v];
      if (items.size() < 2) continue;
      rng.shuffle(items);
      std::size_t half = items.size() / 2;
      std::size_t n0 = std::min(half, kGroupCap);
      std::size_t n1 = std::min(items.size() - half, kGroupCap);
      auto center = [&](std::size_t begin, std::size_t count) {
        Tensor c(1, feats.cols());
        for (std::size_t i = 0; i < count; ++i)
          for (std::size_t col = 0; col < feats.cols(); ++col)
            c.at(0, col) += feats.at(static_cast<std::size_t>(items[begin + i]), col);
        for (double& x : c.values()) x /= static_cast<double>(count);
        return c;
      };
      usable.push_back(v);
      center0.push_back(center(0, n0));
      center1.push_back(center(half, n1));
    }
    auto f = open("similarity_matrix.tsv");
    f << "value";
    for (std::size_t v : usable) f << '\t' << v;
    f << '\n';
    for (std::size_t a = 0; a < usable.size(); ++a) {
      f << usable[a];
      for (std::size_t b = 0; b < usable.size(); ++b) {
        double cs = dot_row(center0[a], 0, center1[b], 0) /
                    (row_norm(center0[a], 0) * row_norm(center1[b], 0));
        f << '\t' << cs;
      }
      f << '\n';
    }
  }

  // (c) raw feature dump with domain tags
  {
    constexpr std::size_t kDump = 2000;
    std::vector<std::int64_t> ids(log.num_items());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
    rng.shuffle(ids);
    std::size_t n = std::min(kDump, ids.size());
    auto f = open("feature_dump.tsv");
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t item = static_cast<std::size_t>(ids[i]);
      f << ids[i] << '\t' << (counts[item] > 0 ? "source" : "target");
      for (std::size_t c = 0; c < feats.cols(); ++c) f << '\t' << feats.at(item, c);
      f << '\n';
    }
  }

  // (d) domain distance triple
  {
    std::size_t batch = std::min<std::size_t>(256, train_records.size() / 2);
    DomainDistances d = domain_distance(setup, train_records, batch, rng.next_u64());
    auto f = open("domain_distance.tsv");
    f << "src_src\ttgt_tgt\tsrc_tgt\n";
    f << d.src_src << '\t' << d.tgt_tgt << '\t' << d.src_tgt << '\n';
  }
}

std::string format_metrics(const SlicedMetrics& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "slice      queries  NDCG@" << m.k << "  Recall@" << m.k << "  MAP\n";
  auto line = [&](const char* name, const SliceReport& s) {
    os << name << "  " << s.per_query.size() << "  " << s.mean.ndcg << "  "
       << s.mean.recall << "  " << s.mean.map << "\n";
  };
  line("hot      ", m.hot);
  line("long-tail", m.long_tail);
  line("entire   ", m.entire);
  return os.str();
}

void write_metrics_report(const SlicedMetrics& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << std::setprecision(17);
  f << "slice\tmetric\tk\tmean\n";
  auto block = [&](const char* name, const SliceReport& s) {
    f << name << "\tndcg\t" << m.k << '\t' << s.mean.ndcg << '\n';
    f << name << "\trecall\t" << m.k << '\t' << s.mean.recall << '\n';
    f << name << "\tmap\t-\t" << s.mean.map << '\n';
  };
  block("hot", m.hot);
  block("long_tail", m.long_tail);
  block("entire", m.entire);
}

}  // namespace esam
