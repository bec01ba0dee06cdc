#ifndef ESAM_CHECKPOINT_HPP
#define ESAM_CHECKPOINT_HPP

#include <optional>
#include <string>

#include "esam/losses.hpp"
#include "esam/model.hpp"
#include "esam/optim.hpp"

namespace esam {

// Versioned binary dump of config + parameter arrays (+ optimizer state).
// Round-trips are bit-exact: raw little-endian doubles.
struct Checkpoint {
  TowerConfig tower;
  ScoringKind scoring = ScoringKind::kDotSigmoid;
  LossConfig loss;
  ModelParams params;
  std::optional<AdamOptimizer> adam;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace esam

#endif  // ESAM_CHECKPOINT_HPP
