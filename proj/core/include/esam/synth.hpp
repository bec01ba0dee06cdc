#ifndef ESAM_SYNTH_HPP
#define ESAM_SYNTH_HPP

#include <cstdint>
#include <vector>

#include "esam/data.hpp"

namespace esam {

struct SynthConfig {
  std::size_t num_queries = 2000;
  std::size_t num_items = 5000;
  std::size_t latent_dim = 8;          // k; also the number of genre labels
  double alpha = 1.5;                  // popularity power-law exponent
  std::size_t relevant_per_query = 20; // true-relevance quantile as a count
  std::size_t impressions_per_query = 10;
  double label_noise = 0.0;            // per-impression label flip probability
  // correlation between popularity rank and the first latent coordinate:
  // 0 = popularity is a random permutation, 1 = fully determined by factor 0.
  // Nonzero values make the displayed slice structurally skewed, which is the
  // exposure-bias regime this toolkit is built for. Relevance still depends
  // only on the factors.
  double exposure_bias = 0.0;
  std::uint64_t seed = 1;
};

// A world with known ground truth: relevance comes from latent factor dot
// products and is independent of popularity, which only drives exposure.
struct SynthWorld {
  SynthConfig cfg;
  std::vector<std::vector<double>> query_factors;
  std::vector<std::vector<double>> item_factors;
  std::vector<double> popularity;                    // unnormalized weights
  std::vector<std::int64_t> genre;                   // per item, in [0, k)
  std::vector<std::vector<std::int64_t>> relevant;   // per query, sorted item ids

  bool is_relevant(std::int64_t query, std::int64_t item) const;
  double oracle_score(std::int64_t query, std::int64_t item) const;
};

SynthWorld generate_world(const SynthConfig& cfg);

// Displayed items sampled by popularity; labels from true relevance with
// optional flip noise. Output uses the generic-log internal representation.
InteractionLog emit_log(const SynthWorld& world, std::uint64_t seed);

// Writes log.tsv / items.tsv / queries.tsv / truth.tsv under dir.
void write_synth_dataset(const SynthWorld& world, const InteractionLog& log,
                         const std::string& dir);

}  // namespace esam

#endif  // ESAM_SYNTH_HPP
