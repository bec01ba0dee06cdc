#ifndef ESAM_TENSOR_HPP
#define ESAM_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "esam/error.hpp"

namespace esam {

// Dense row-major 2-D array of doubles. 1-D data is a 1xN or Nx1 tensor.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row(const std::vector<double>& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

enum class OpKind {
  kLeaf,
  kMatMul,
  kAdd,       // broadcast: rhs may be a 1xC row against an RxC lhs
  kSub,
  kMul,
  kRelu,
  kSigmoid,
  kLog,
  kHinge,     // max(0, x); alias of relu kept as its own kind for loss code
  kSquare,
  kL2NormalizeRows,
  kSum,
  kMean,
  kFrobeniusSq,
  kMeanRows,  // column means, RxC -> 1xC
  kGatherRows,
  kTranspose,
  kScalarAffine,  // a*x + b
  kClamp,
  kConcatCols,
  kConcatRows,
};

// Append-only computation graph; node ids are topologically ordered by
// construction. Rebuilt from scratch every training step.
class Graph {
 public:
  using NodeId = std::size_t;

  NodeId leaf(Tensor value, bool requires_grad = false);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId log(NodeId a);
  NodeId hinge(NodeId a);
  NodeId square(NodeId a);
  NodeId l2_normalize_rows(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId frobenius_sq(NodeId a);
  NodeId mean_rows(NodeId a);
  NodeId gather_rows(NodeId table, std::vector<std::int64_t> ids);
  NodeId transpose(NodeId a);
  NodeId scalar_affine(NodeId a, double mul, double add);
  NodeId clamp(NodeId a, double lo, double hi);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId concat_rows(NodeId a, NodeId b);

  // Populates grad on every requires_grad node reachable from root.
  // root must be 1x1; calling twice on the same graph is an error.
  void backward(NodeId root);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const;
  bool has_grad(NodeId id) const { return !nodes_[id].grad.empty(); }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t num_nodes() const { return nodes_.size(); }
  double scalar(NodeId id) const;

 private:
  struct Node {
    OpKind kind;
    NodeId in0 = 0;
    NodeId in1 = 0;
    int n_in = 0;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::int64_t> ids;  // kGatherRows only
    double a = 0.0;                 // kScalarAffine mul / kClamp lo
    double b = 0.0;                 // kScalarAffine add / kClamp hi
  };

  NodeId push(Node n);
  NodeId unary(OpKind kind, NodeId a, Tensor value);
  NodeId binary(OpKind kind, NodeId a, NodeId b, Tensor value);
  void backward_node(Node& n);
  Tensor& grad_buf(NodeId id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace esam

#endif  // ESAM_TENSOR_HPP
