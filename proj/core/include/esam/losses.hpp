#ifndef ESAM_LOSSES_HPP
#define ESAM_LOSSES_HPP

#include <cstdint>
#include <vector>

#include "esam/tensor.hpp"

namespace esam {

// All scalar knobs of the combined objective.
struct LossConfig {
  double lambda1 = 0.7;  // attribute-correlation alignment weight
  double lambda2 = 0.3;  // center-wise clustering weight
  double lambda3 = 0.5;  // self-training weight
  double m1 = 0.2;       // intra-class margin (squared distance)
  double m2 = 0.7;       // inter-class margin (squared distance)
  double p1 = 0.2;       // low-confidence threshold
  double p2 = 0.8;       // high-confidence threshold
  int num_classes = 2;   // feedback classes
  bool detach_centers = false;

  void validate() const;
};

// Probabilities are clamped to [kProbEps, 1-kProbEps] before any log.
inline constexpr double kProbEps = 1e-7;

// -(1/n) sum [y log s + (1-y) log(1-s)]; scores is 1xn, labels binary.
Graph::NodeId loss_pointwise_ce(Graph& g, Graph::NodeId scores,
                                const std::vector<int>& labels);

// (1/L^2) || Ds^T Ds - Dt^T Dt ||_F^2 over raw Gram matrices.
Graph::NodeId loss_a2c(Graph& g, Graph::NodeId source_feats,
                       Graph::NodeId target_feats);

// Hinge pull of normalized same-class rows toward their center plus hinge
// push between distinct class centers. Classes absent from the batch
// contribute nothing.
Graph::NodeId loss_center_clustering(Graph& g, Graph::NodeId source_feats,
                                     const std::vector<int>& labels,
                                     const LossConfig& cfg);

// Mean of -s log s over { j : s_j < p1 or s_j > p2 }. The selection mask is
// taken from current values and carries no gradient. Empty selection gives 0.
Graph::NodeId loss_self_training(Graph& g, Graph::NodeId target_probs,
                                 const LossConfig& cfg);

// L_s + lambda1*L_DA + lambda2*L_DCc + lambda3*L_DCp.
Graph::NodeId loss_total(Graph& g, Graph::NodeId ls, Graph::NodeId lda,
                         Graph::NodeId ldc_center, Graph::NodeId ldc_pseudo,
                         const LossConfig& cfg);

}  // namespace esam

#endif  // ESAM_LOSSES_HPP
