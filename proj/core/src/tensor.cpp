#include "esam/tensor.hpp"

#include <cmath>
#include <string>

namespace esam {

namespace {

constexpr double kNormEps = 1e-12;  // below this a row is considered collapsed

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

}  // namespace

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("from_rows: ragged rows");
    for (double v : row) t.values_[i++] = v;
  }
  return t;
}

Tensor Tensor::row(const std::vector<double>& v) {
  Tensor t(1, v.size());
  t.values_ = v;
  return t;
}

Graph::NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Graph::NodeId Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::unary(OpKind kind, NodeId a, Tensor value) {
  Node n;
  n.kind = kind;
  n.in0 = a;
  n.n_in = 1;
  n.value = std::move(value);
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::binary(OpKind kind, NodeId a, NodeId b, Tensor value) {
  Node n;
  n.kind = kind;
  n.in0 = a;
  n.in1 = b;
  n.n_in = 2;
  n.value = std::move(value);
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (A.cols() != B.rows())
    throw DimensionError("matmul: inner dims disagree, " + shape_str(A) + " vs " +
                         shape_str(B));
  Tensor C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t k = 0; k < A.cols(); ++k) {
      double aik = A.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = B.data() + k * B.cols();
      double* crow = C.data() + i * C.cols();
      for (std::size_t j = 0; j < B.cols(); ++j) crow[j] += aik * brow[j];
    }
  return binary(OpKind::kMatMul, a, b, std::move(C));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (A.same_shape(B)) {
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.values()[i] += B.values()[i];
    return binary(OpKind::kAdd, a, b, std::move(C));
  }
  // row-vector bias broadcast against a matrix
  if (B.rows() == 1 && B.cols() == A.cols()) {
    Tensor C = A;
    for (std::size_t r = 0; r < A.rows(); ++r)
      for (std::size_t c = 0; c < A.cols(); ++c) C.at(r, c) += B.at(0, c);
    return binary(OpKind::kAdd, a, b, std::move(C));
  }
  throw DimensionError("add: incompatible shapes " + shape_str(A) + " vs " +
                       shape_str(B));
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B))
    throw DimensionError("sub: shapes differ, " + shape_str(A) + " vs " +
                         shape_str(B));
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.values()[i] -= B.values()[i];
  return binary(OpKind::kSub, a, b, std::move(C));
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B))
    throw DimensionError("mul: shapes differ, " + shape_str(A) + " vs " +
                         shape_str(B));
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.values()[i] *= B.values()[i];
  return binary(OpKind::kMul, a, b, std::move(C));
}

Graph::NodeId Graph::relu(NodeId a) {
  Tensor C = nodes_[a].value;
  for (double& v : C.values())
    if (v < 0.0) v = 0.0;
  return unary(OpKind::kRelu, a, std::move(C));
}

Graph::NodeId Graph::hinge(NodeId a) {
  Tensor C = nodes_[a].value;
  for (double& v : C.values())
    if (v < 0.0) v = 0.0;
  return unary(OpKind::kHinge, a, std::move(C));
}

Graph::NodeId Graph::sigmoid(NodeId a) {
  Tensor C = nodes_[a].value;
  for (double& v : C.values()) v = 1.0 / (1.0 + std::exp(-v));
  return unary(OpKind::kSigmoid, a, std::move(C));
}

Graph::NodeId Graph::log(NodeId a) {
  Tensor C = nodes_[a].value;
  for (double& v : C.values()) {
    if (v <= 0.0)
      throw DomainError("log: non-positive input " + std::to_string(v));
    v = std::log(v);
  }
  return unary(OpKind::kLog, a, std::move(C));
}

Graph::NodeId Graph::square(NodeId a) {
  Tensor C = nodes_[a].value;
  for (double& v : C.values()) v *= v;
  return unary(OpKind::kSquare, a, std::move(C));
}

Graph::NodeId Graph::l2_normalize_rows(NodeId a) {
  Tensor C = nodes_[a].value;
  for (std::size_t r = 0; r < C.rows(); ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < C.cols(); ++c) ss += C.at(r, c) * C.at(r, c);
    double norm = std::sqrt(ss);
    if (norm <= kNormEps)
      throw NumericError("l2_normalize_rows: degenerate row " + std::to_string(r) +
                         " (norm " + std::to_string(norm) + ")");
    for (std::size_t c = 0; c < C.cols(); ++c) C.at(r, c) /= norm;
  }
  return unary(OpKind::kL2NormalizeRows, a, std::move(C));
}

Graph::NodeId Graph::sum(NodeId a) {
  const Tensor& A = nodes_[a].value;
  if (A.empty()) throw DimensionError("sum: empty tensor");
  double s = 0.0;
  for (double v : A.values()) s += v;
  Tensor C(1, 1, s);
  return unary(OpKind::kSum, a, std::move(C));
}

Graph::NodeId Graph::mean(NodeId a) {
  const Tensor& A = nodes_[a].value;
  if (A.empty()) throw DimensionError("mean: empty tensor");
  double s = 0.0;
  for (double v : A.values()) s += v;
  Tensor C(1, 1, s / static_cast<double>(A.size()));
  return unary(OpKind::kMean, a, std::move(C));
}

Graph::NodeId Graph::frobenius_sq(NodeId a) {
  const Tensor& A = nodes_[a].value;
  if (A.empty()) throw DimensionError("frobenius_sq: empty tensor");
  double s = 0.0;
  for (double v : A.values()) s += v * v;
  Tensor C(1, 1, s);
  return unary(OpKind::kFrobeniusSq, a, std::move(C));
}

Graph::NodeId Graph::mean_rows(NodeId a) {
  const Tensor& A = nodes_[a].value;
  if (A.rows() == 0) throw DimensionError("mean_rows: zero rows");
  Tensor C(1, A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) C.at(0, c) += A.at(r, c);
  for (double& v : C.values()) v /= static_cast<double>(A.rows());
  return unary(OpKind::kMeanRows, a, std::move(C));
}

Graph::NodeId Graph::gather_rows(NodeId table, std::vector<std::int64_t> ids) {
  const Tensor& T = nodes_[table].value;
  Tensor C(ids.size(), T.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::int64_t id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= T.rows())
      throw IndexError("gather_rows: id " + std::to_string(id) +
                       " out of range for table with " + std::to_string(T.rows()) +
                       " rows");
    for (std::size_t c = 0; c < T.cols(); ++c)
      C.at(i, c) = T.at(static_cast<std::size_t>(id), c);
  }
  NodeId out = unary(OpKind::kGatherRows, table, std::move(C));
  nodes_[out].ids = std::move(ids);
  return out;
}

Graph::NodeId Graph::transpose(NodeId a) {
  const Tensor& A = nodes_[a].value;
  Tensor C(A.cols(), A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) C.at(c, r) = A.at(r, c);
  return unary(OpKind::kTranspose, a, std::move(C));
}

Graph::NodeId Graph::scalar_affine(NodeId a, double mul, double add) {
  Tensor C = nodes_[a].value;
  for (double& v : C.values()) v = mul * v + add;
  NodeId out = unary(OpKind::kScalarAffine, a, std::move(C));
  nodes_[out].a = mul;
  nodes_[out].b = add;
  return out;
}

Graph::NodeId Graph::clamp(NodeId a, double lo, double hi) {
  if (lo > hi)
    throw DomainError("clamp: lo " + std::to_string(lo) + " > hi " +
                      std::to_string(hi));
  Tensor C = nodes_[a].value;
  for (double& v : C.values()) {
    if (v < lo) v = lo;
    if (v > hi) v = hi;
  }
  NodeId out = unary(OpKind::kClamp, a, std::move(C));
  nodes_[out].a = lo;
  nodes_[out].b = hi;
  return out;
}

Graph::NodeId Graph::concat_cols(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (A.rows() != B.rows())
    throw DimensionError("concat_cols: row counts differ, " + shape_str(A) +
                         " vs " + shape_str(B));
  Tensor C(A.rows(), A.cols() + B.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) C.at(r, c) = A.at(r, c);
    for (std::size_t c = 0; c < B.cols(); ++c) C.at(r, A.cols() + c) = B.at(r, c);
  }
  return binary(OpKind::kConcatCols, a, b, std::move(C));
}

Graph::NodeId Graph::concat_rows(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (A.cols() != B.cols() && A.rows() != 0 && B.rows() != 0)
    throw DimensionError("concat_rows: col counts differ, " + shape_str(A) +
                         " vs " + shape_str(B));
  std::size_t cols = A.rows() != 0 ? A.cols() : B.cols();
  Tensor C(A.rows() + B.rows(), cols);
  for (std::size_t i = 0; i < A.size(); ++i) C.values()[i] = A.values()[i];
  for (std::size_t i = 0; i < B.size(); ++i) C.values()[A.size() + i] = B.values()[i];
  return binary(OpKind::kConcatRows, a, b, std::move(C));
}

const Tensor& Graph::grad(NodeId id) const {
  const Node& n = nodes_[id];
  if (!n.requires_grad || n.grad.empty())
    throw DomainError("grad: node has no gradient (requires_grad=" +
                      std::string(n.requires_grad ? "true" : "false") + ")");
  return n.grad;
}

double Graph::scalar(NodeId id) const {
  const Tensor& t = nodes_[id].value;
  if (t.rows() != 1 || t.cols() != 1)
    throw DimensionError("scalar: node is " + shape_str(t) + ", want 1x1");
  return t.values()[0];
}

Tensor& Graph::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty() || !n.grad.same_shape(n.value))
    n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(NodeId root) {
  if (backward_done_)
    throw DomainError("backward: already invoked on this graph");
  Node& r = nodes_[root];
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw DimensionError("backward: root is " + shape_str(r.value) + ", want 1x1");
  backward_done_ = true;
  grad_buf(root).values()[0] = 1.0;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || n.kind == OpKind::kLeaf) continue;
    backward_node(n);
  }
}

void Graph::backward_node(Node& n) {
  const Tensor& g = n.grad;
  auto want = [&](NodeId id) { return nodes_[id].requires_grad; };
  switch (n.kind) {
    case OpKind::kMatMul: {
      const Tensor& A = nodes_[n.in0].value;
      const Tensor& B = nodes_[n.in1].value;
      if (want(n.in0)) {
        Tensor& ga = grad_buf(n.in0);  // ga += g * B^T
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t k = 0; k < A.cols(); ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < B.cols(); ++j)
              s += g.at(i, j) * B.at(k, j);
            ga.at(i, k) += s;
          }
      }
      if (want(n.in1)) {
        Tensor& gb = grad_buf(n.in1);  // gb += A^T * g
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t k = 0; k < A.cols(); ++k) {
            double aik = A.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < g.cols(); ++j)
              gb.at(k, j) += aik * g.at(i, j);
          }
      }
      break;
    }
    case OpKind::kAdd: {
      if (want(n.in0)) {
        Tensor& ga = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga.values()[i] += g.values()[i];
      }
      if (want(n.in1)) {
        Tensor& gb = grad_buf(n.in1);
        const Tensor& B = nodes_[n.in1].value;
        if (B.same_shape(g)) {
          for (std::size_t i = 0; i < g.size(); ++i)
            gb.values()[i] += g.values()[i];
        } else {  // broadcast row: sum over rows
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gb.at(0, c) += g.at(r, c);
        }
      }
      break;
    }
    case OpKind::kSub: {
      if (want(n.in0)) {
        Tensor& ga = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga.values()[i] += g.values()[i];
      }
      if (want(n.in1)) {
        Tensor& gb = grad_buf(n.in1);
        for (std::size_t i = 0; i < g.size(); ++i) gb.values()[i] -= g.values()[i];
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor& A = nodes_[n.in0].value;
      const Tensor& B = nodes_[n.in1].value;
      if (want(n.in0)) {
        Tensor& ga = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga.values()[i] += g.values()[i] * B.values()[i];
      }
      if (want(n.in1)) {
        Tensor& gb = grad_buf(n.in1);
        for (std::size_t i = 0; i < g.size(); ++i)
          gb.values()[i] += g.values()[i] * A.values()[i];
      }
      break;
    }
    case OpKind::kRelu:
    case OpKind::kHinge: {
      // subgradient at 0 is 0
      const Tensor& X = nodes_[n.in0].value;
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (X.values()[i] > 0.0) ga.values()[i] += g.values()[i];
      break;
    }
    case OpKind::kSigmoid: {
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double y = n.value.values()[i];
        ga.values()[i] += g.values()[i] * y * (1.0 - y);
      }
      break;
    }
    case OpKind::kLog: {
      const Tensor& X = nodes_[n.in0].value;
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.values()[i] += g.values()[i] / X.values()[i];
      break;
    }
    case OpKind::kSquare: {
      const Tensor& X = nodes_[n.in0].value;
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.values()[i] += 2.0 * X.values()[i] * g.values()[i];
      break;
    }
    case OpKind::kL2NormalizeRows: {
      const Tensor& X = nodes_[n.in0].value;
      const Tensor& Y = n.value;
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t r = 0; r < X.rows(); ++r) {
        double ss = 0.0, dot = 0.0;
        for (std::size_t c = 0; c < X.cols(); ++c) {
          ss += X.at(r, c) * X.at(r, c);
          dot += g.at(r, c) * Y.at(r, c);
        }
        double norm = std::sqrt(ss);
        for (std::size_t c = 0; c < X.cols(); ++c)
          ga.at(r, c) += (g.at(r, c) - dot * Y.at(r, c)) / norm;
      }
      break;
    }
    case OpKind::kSum: {
      Tensor& ga = grad_buf(n.in0);
      double gs = g.values()[0];
      for (double& v : ga.values()) v += gs;
      break;
    }
    case OpKind::kMean: {
      Tensor& ga = grad_buf(n.in0);
      double gs = g.values()[0] / static_cast<double>(ga.size());
      for (double& v : ga.values()) v += gs;
      break;
    }
    case OpKind::kFrobeniusSq: {
      const Tensor& X = nodes_[n.in0].value;
      Tensor& ga = grad_buf(n.in0);
      double gs = g.values()[0];
      for (std::size_t i = 0; i < X.size(); ++i)
        ga.values()[i] += 2.0 * X.values()[i] * gs;
      break;
    }
    case OpKind::kMeanRows: {
      Tensor& ga = grad_buf(n.in0);
      double inv = 1.0 / static_cast<double>(ga.rows());
      for (std::size_t r = 0; r < ga.rows(); ++r)
        for (std::size_t c = 0; c < ga.cols(); ++c)
          ga.at(r, c) += g.at(0, c) * inv;
      break;
    }
    case OpKind::kGatherRows: {
      // repeated ids accumulate
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t i = 0; i < n.ids.size(); ++i)
        for (std::size_t c = 0; c < g.cols(); ++c)
          ga.at(static_cast<std::size_t>(n.ids[i]), c) += g.at(i, c);
      break;
    }
    case OpKind::kTranspose: {
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga.at(c, r) += g.at(r, c);
      break;
    }
    case OpKind::kScalarAffine: {
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.values()[i] += n.a * g.values()[i];
      break;
    }
    case OpKind::kClamp: {
      const Tensor& X = nodes_[n.in0].value;
      Tensor& ga = grad_buf(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (X.values()[i] >= n.a && X.values()[i] <= n.b)
          ga.values()[i] += g.values()[i];
      break;
    }
    case OpKind::kConcatCols: {
      const Tensor& A = nodes_[n.in0].value;
      if (want(n.in0)) {
        Tensor& ga = grad_buf(n.in0);
        for (std::size_t r = 0; r < ga.rows(); ++r)
          for (std::size_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += g.at(r, c);
      }
      if (want(n.in1)) {
        Tensor& gb = grad_buf(n.in1);
        for (std::size_t r = 0; r < gb.rows(); ++r)
          for (std::size_t c = 0; c < gb.cols(); ++c)
            gb.at(r, c) += g.at(r, A.cols() + c);
      }
      break;
    }
    case OpKind::kConcatRows: {
      const Tensor& A = nodes_[n.in0].value;
      if (want(n.in0)) {
        Tensor& ga = grad_buf(n.in0);
        for (std::size_t i = 0; i < A.size(); ++i)
          ga.values()[i] += g.values()[i];
      }
      if (want(n.in1)) {
        Tensor& gb = grad_buf(n.in1);
        for (std::size_t i = 0; i < gb.size(); ++i)
          gb.values()[i] += g.values()[A.size() + i];
      }
      break;
    }
    case OpKind::kLeaf:
      break;
  }
}

}  // namespace esam
