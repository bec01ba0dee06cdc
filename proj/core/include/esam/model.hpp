#ifndef ESAM_MODEL_HPP
#define ESAM_MODEL_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "esam/tensor.hpp"

namespace esam {

enum class ScoringKind { kDotSigmoid, kCosine };

// Widths and vocab sizes of both towers. hidden.back() is the feature
// dimension L; both towers end in L so their outputs can be scored.
struct TowerConfig {
  std::vector<std::size_t> query_field_vocab;
  std::vector<std::size_t> item_field_vocab;
  std::size_t num_items = 0;      // behavior vocab and item-bias length
  std::size_t keyword_vocab = 0;  // 0 disables the keyword group (search mode only)
  std::size_t embed_dim = 16;
  std::vector<std::size_t> hidden = {256, 128};
  // L2-normalize tower outputs; keeps feature norms fixed so the adaptation
  // losses act on directions only. Natural companion to cosine scoring.
  bool normalize_output = false;

  std::size_t feature_dim() const { return hidden.back(); }
  std::size_t query_input_dim() const;
  std::size_t item_input_dim() const;
  void validate() const;
};

struct QueryInput {
  std::vector<std::int64_t> profile;   // one id per query field
  std::vector<std::int64_t> behavior;  // item ids, mean-pooled (may be empty)
  std::vector<std::int64_t> keywords;  // token ids, search mode only
};

struct ItemInput {
  // one list of value ids per item field; multi-valued fields (genres) are
  // mean-pooled
  std::vector<std::vector<std::int64_t>> fields;
};

struct DenseLayer {
  Tensor w;  // in x out
  Tensor b;  // 1 x out
};

struct ModelParams {
  std::vector<Tensor> query_field_embed;
  Tensor behavior_embed;
  Tensor keyword_embed;  // empty unless keyword_vocab > 0
  std::vector<Tensor> item_field_embed;
  std::vector<DenseLayer> query_mlp;
  std::vector<DenseLayer> item_mlp;
  Tensor item_bias;  // num_items x 1, zero-initialized

  // fixed traversal order shared by the optimizer and checkpoint code
  std::vector<Tensor*> all();
  std::vector<const Tensor*> all() const;
};

ModelParams init_params(const TowerConfig& cfg, std::uint64_t seed);

// Graph leaf ids for every parameter, aligned with ModelParams::all().
struct ParamNodes {
  std::vector<Graph::NodeId> ids;
  std::vector<Graph::NodeId> query_field_embed;
  Graph::NodeId behavior_embed = 0;
  Graph::NodeId keyword_embed = 0;
  bool has_keywords = false;
  std::vector<Graph::NodeId> item_field_embed;
  std::vector<std::pair<Graph::NodeId, Graph::NodeId>> query_mlp;
  std::vector<std::pair<Graph::NodeId, Graph::NodeId>> item_mlp;
  Graph::NodeId item_bias = 0;
};

ParamNodes register_params(Graph& g, const ModelParams& params,
                           bool requires_grad = true);

// v_q, 1xL
Graph::NodeId embed_query(Graph& g, const ParamNodes& p, const TowerConfig& cfg,
                          const QueryInput& q);

// stacked item features, nxL; empty batch gives 0xL
Graph::NodeId embed_items(Graph& g, const ParamNodes& p, const TowerConfig& cfg,
                          std::span<const ItemInput> items);

Graph::NodeId embed_item(Graph& g, const ParamNodes& p, const TowerConfig& cfg,
                         const ItemInput& d);

// sigmoid(b_d + v_q . v_d^T) for each item row; 1xn
Graph::NodeId score_dot_sigmoid(Graph& g, Graph::NodeId vq, Graph::NodeId items,
                                Graph::NodeId bias_col);

// cosine(v_q, v_d) for each item row, in [-1,1]; 1xn
Graph::NodeId score_cosine(Graph& g, Graph::NodeId vq, Graph::NodeId items);

// maps raw scores to [0,1]: identity for dot-sigmoid, (s+1)/2 for cosine
Graph::NodeId to_probability(Graph& g, Graph::NodeId raw, ScoringKind kind);

double to_probability(double raw, ScoringKind kind);

}  // namespace esam

#endif  // ESAM_MODEL_HPP
