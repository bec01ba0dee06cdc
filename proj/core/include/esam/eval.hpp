#ifndef ESAM_EVAL_HPP
#define ESAM_EVAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "esam/data.hpp"
#include "esam/losses.hpp"

namespace esam {

// Items in descending score order (ties broken by ascending item id) plus the
// relevant set, sorted.
struct RankedList {
  std::int64_t query = 0;
  std::vector<std::int64_t> items;
  std::vector<std::int64_t> relevant;

  bool is_relevant(std::int64_t item) const {
    return std::binary_search(relevant.begin(), relevant.end(), item);
  }
};

// Sorts (item, score) pairs into a RankedList; input order never matters.
RankedList make_ranked(std::int64_t query,
                       const std::vector<std::int64_t>& items,
                       const std::vector<double>& scores,
                       std::vector<std::int64_t> relevant);

// Binary-gain NDCG with 1-based log2(i+1) discounts; 0 without relevant items.
double ndcg_at_k(const RankedList& ranked, std::size_t k);

double recall_at_k(const RankedList& ranked, std::size_t k);

// Average precision over the full list; map over queries is the mean of this.
double average_precision(const RankedList& ranked);

struct MetricTriple {
  double ndcg = 0.0;
  double recall = 0.0;
  double map = 0.0;
};

struct SliceReport {
  MetricTriple mean;
  std::vector<std::pair<std::int64_t, MetricTriple>> per_query;
};

// hot / long-tail / entire; each slice filters both candidates and relevant
// sets, so each is a self-contained retrieval task.
struct SlicedMetrics {
  SliceReport hot;
  SliceReport long_tail;
  SliceReport entire;
  std::size_t k = 20;
};

// Forward-only feature computation for evaluation paths.
Tensor forward_item_features(const ModelParams& params, const TowerConfig& cfg,
                             std::span<const ItemInput> items,
                             std::size_t chunk = 512);
Tensor forward_query_feature(const ModelParams& params, const TowerConfig& cfg,
                             const QueryInput& q);

struct EvalSetup {
  const ModelParams* params = nullptr;
  const TowerConfig* cfg = nullptr;
  ScoringKind scoring = ScoringKind::kDotSigmoid;
  const InteractionLog* log = nullptr;
  std::size_t k = 20;
};

// Per query with at least one positive record in eval_records: rank the full
// catalog minus that query's training positives and score the three slices.
SlicedMetrics evaluate_sliced(const EvalSetup& setup,
                              const std::vector<Interaction>& eval_records,
                              const std::vector<Interaction>& train_records,
                              const DisplayFrequencyIndex& freq);

// (1/L^2) ||A^T A - B^T B||_F^2 on plain feature matrices.
double a2c_distance(const Tensor& a, const Tensor& b);

struct DomainDistances {
  double src_src = 0.0;
  double tgt_tgt = 0.0;
  double src_tgt = 0.0;
};

// Table-style diagnostic: distances between two disjoint batches per domain.
DomainDistances domain_distance(const EvalSetup& setup,
                                const std::vector<Interaction>& train_records,
                                std::size_t batch_size, std::uint64_t seed);

// Writes score_histogram.tsv, similarity_matrix.tsv, feature_dump.tsv and
// domain_distance.tsv under out_dir.
void export_diagnostics(const EvalSetup& setup,
                        const std::vector<Interaction>& train_records,
                        const std::string& out_dir, std::uint64_t seed);

void write_metrics_report(const SlicedMetrics& m, const std::string& path);
std::string format_metrics(const SlicedMetrics& m);

}  // namespace esam

#endif  // ESAM_EVAL_HPP
