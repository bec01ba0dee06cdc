#include "esam/optim.hpp"

#include <cmath>
#include <string>

namespace esam {

namespace {

void check_shapes(std::span<Tensor* const> params,
                  std::span<const Tensor* const> grads) {
  if (params.size() != grads.size())
    throw DimensionError("optimizer: " + std::to_string(params.size()) +
                         " params vs " + std::to_string(grads.size()) + " grads");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i]->same_shape(*grads[i]))
      throw DimensionError("optimizer: shape mismatch at param " +
                           std::to_string(i));
}

}  // namespace

void sgd_step(std::span<Tensor* const> params,
              std::span<const Tensor* const> grads, double lr) {
  check_shapes(params, grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i]->data();
    const double* g = grads[i]->data();
    for (std::size_t j = 0; j < params[i]->size(); ++j) p[j] -= lr * g[j];
  }
}

void AdamOptimizer::step(std::span<Tensor* const> params,
                         std::span<const Tensor* const> grads) {
  check_shapes(params, grads);
  if (m_.empty()) {
    for (const Tensor* g : grads) {
      m_.emplace_back(g->rows(), g->cols());
      v_.emplace_back(g->rows(), g->cols());
    }
  } else if (m_.size() != params.size()) {
    throw DimensionError("adam: state has " + std::to_string(m_.size()) +
                         " slots, got " + std::to_string(params.size()) +
                         " params");
  }

  double clip_scale = 1.0;
  if (cfg_.grad_clip > 0.0) {
    double ss = 0.0;
    for (const Tensor* g : grads)
      for (double x : g->values()) ss += x * x;
    double norm = std::sqrt(ss);
    if (norm > cfg_.grad_clip) clip_scale = cfg_.grad_clip / norm;
  }

  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!m_[i].same_shape(*params[i]))
      throw DimensionError("adam: moment shape mismatch at param " +
                           std::to_string(i));
    double* p = params[i]->data();
    const double* g = grads[i]->data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      double gj = g[j] * clip_scale;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamOptimizer::restore(std::int64_t t, std::vector<Tensor> m,
                            std::vector<Tensor> v) {
  if (m.size() != v.size())
    throw DimensionError("adam restore: moment list sizes differ");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace esam
