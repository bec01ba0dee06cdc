#ifndef ESAM_DATA_HPP
#define ESAM_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "esam/model.hpp"
#include "esam/rng.hpp"

namespace esam {

struct Interaction {
  std::int64_t query = 0;
  std::int64_t item = 0;
  int label = 0;  // 1 = positive feedback
  std::int64_t timestamp = 0;
};

// Interaction records plus the catalog and query tables they reference.
// Ids are dense 0..V-1 after loading.
struct InteractionLog {
  std::vector<Interaction> records;
  std::vector<ItemInput> catalog;   // item id -> attribute value lists
  std::vector<QueryInput> queries;  // query id -> profile + behavior ids
  std::vector<std::size_t> query_field_vocab;
  std::vector<std::size_t> item_field_vocab;
  // item field used for "similar item" target sampling (genre / category)
  std::size_t similarity_field = 0;

  std::size_t num_items() const { return catalog.size(); }
  std::size_t num_queries() const { return queries.size(); }
};

struct TrainingExample {
  std::int64_t query = 0;
  std::vector<std::int64_t> source_items;
  std::vector<int> source_labels;
  std::vector<std::int64_t> target_items;
};

struct DisplayFrequencyIndex {
  std::vector<std::int64_t> counts;  // per item, training split only
  std::vector<bool> hot;             // hot/long-tail partition of the catalog

  bool is_hot(std::int64_t item) const {
    return hot[static_cast<std::size_t>(item)];
  }
};

struct Split {
  std::vector<Interaction> train;
  std::vector<Interaction> val;
  std::vector<Interaction> test;
};

// MovieLens ::-delimited files (ratings.dat, users.dat, movies.dat) under dir.
// Ratings > 3 become positives; every rated pair counts as displayed.
InteractionLog load_movielens(const std::string& dir);

// Line-oriented tab-separated log (query_id, item_id, label[, timestamp]) with
// sidecar items.tsv / queries.tsv attribute tables; see README for the schema.
InteractionLog load_generic_log(const std::string& dir);

Split split_records(const InteractionLog& log, std::uint64_t seed,
                    int r_train = 8, int r_val = 1, int r_test = 1);

DisplayFrequencyIndex build_display_frequency(
    const std::vector<Interaction>& train, std::size_t num_items);

// Precomputed attribute-value -> items index for target sampling.
class SimilarityIndex {
 public:
  SimilarityIndex(const InteractionLog& log);

  // Uniform sample (no replacement) of n non-displayed items sharing at least
  // one similarity-field value with the displayed set; pads from uniform
  // non-displayed items when the similar pool is short.
  std::vector<std::int64_t> sample_targets(
      const std::vector<std::int64_t>& displayed, std::size_t n, Rng& rng) const;

 private:
  const InteractionLog& log_;
  std::vector<std::vector<std::int64_t>> by_value_;
};

// One epoch of training examples: queries' displayed records are chunked into
// groups of n (grouping fixed by seed, not epoch), targets resampled per epoch.
std::vector<TrainingExample> make_epoch(const InteractionLog& log,
                                        const std::vector<Interaction>& train,
                                        const SimilarityIndex& sim,
                                        std::size_t n, std::uint64_t seed,
                                        std::uint64_t epoch);

struct ColdStartSplit {
  std::vector<Interaction> cold_test;
  std::vector<Interaction> reduced_train;
};

// Picks 20% of test records at random and drops every training record whose
// item occurs in the picked set.
ColdStartSplit cold_start_split(const std::vector<Interaction>& test,
                                const std::vector<Interaction>& train,
                                std::uint64_t seed);

}  // namespace esam

#endif  // ESAM_DATA_HPP
