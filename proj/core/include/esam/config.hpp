#ifndef ESAM_CONFIG_HPP
#define ESAM_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "esam/losses.hpp"
#include "esam/model.hpp"
#include "esam/optim.hpp"

namespace esam {

// Full description of one run. Parsed from a flat JSON file with an
// unknown-key-rejecting parser; defaults follow the reference hyperparameters.
struct RunConfig {
  std::string dataset = "generic";  // "movielens" | "generic"
  std::string data_dir;
  std::string mode = "recommendation";  // "recommendation" | "search"
  std::string out_dir = "run";

  std::size_t embed_dim = 16;
  std::vector<std::size_t> hidden = {256, 128};
  bool normalize_features = false;  // L2-normalize tower outputs

  LossConfig loss;

  std::string optimizer = "adam";  // "adam" | "sgd"
  double learning_rate = 1e-4;
  double grad_clip = 0.0;

  std::size_t n_items = 10;     // source/target items per query group
  std::size_t batch_size = 256; // queries per step
  std::size_t epochs = 10;
  std::size_t k = 20;
  int patience = 3;             // early stopping on validation entire NDCG@k
  std::uint64_t seed = 42;

  ScoringKind scoring() const {
    return mode == "search" ? ScoringKind::kCosine : ScoringKind::kDotSigmoid;
  }
  bool is_base_model() const {
    return loss.lambda1 == 0 && loss.lambda2 == 0 && loss.lambda3 == 0;
  }
  void validate() const;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);
std::string run_config_to_json(const RunConfig& cfg);
void write_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace esam

#endif  // ESAM_CONFIG_HPP
