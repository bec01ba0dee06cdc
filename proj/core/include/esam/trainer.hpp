#ifndef ESAM_TRAINER_HPP
#define ESAM_TRAINER_HPP

#include <iosfwd>
#include <optional>
#include <vector>

#include "esam/config.hpp"
#include "esam/data.hpp"
#include "esam/eval.hpp"

namespace esam {

struct EpochLog {
  std::size_t epoch = 0;
  double l_s = 0.0;
  double l_da = 0.0;
  double l_dc_center = 0.0;
  double l_dc_pseudo = 0.0;
  double total = 0.0;
  double val_ndcg = 0.0;
};

struct TrainResult {
  TowerConfig tower;
  ModelParams best_params;   // weights at the best validation epoch
  ModelParams final_params;  // weights after the last completed epoch
  std::optional<AdamOptimizer> best_adam;
  std::vector<EpochLog> epochs;
  double best_val_ndcg = 0.0;
  std::size_t best_epoch = 0;
};

TowerConfig make_tower_config(const RunConfig& cfg, const InteractionLog& log);

// Full training loop: Adam/SGD over the combined objective with per-epoch
// validation NDCG@k and early stopping. Loss components with zero weight are
// skipped (a BaseModel run never touches the target stream).
TrainResult train_model(const RunConfig& cfg, const InteractionLog& log,
                        const Split& split, std::ostream* log_stream = nullptr);

}  // namespace esam

#endif  // ESAM_TRAINER_HPP
