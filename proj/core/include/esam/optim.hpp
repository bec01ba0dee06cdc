#ifndef ESAM_OPTIM_HPP
#define ESAM_OPTIM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "esam/tensor.hpp"

namespace esam {

// theta <- theta - lr * g
void sgd_step(std::span<Tensor* const> params,
              std::span<const Tensor* const> grads, double lr);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // global L2 norm cap; 0 disables
};

// Standard bias-corrected Adam. Moment arrays are allocated lazily on the
// first step and must shape-match the parameters thereafter.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg) : cfg_(cfg) {}

  void step(std::span<Tensor* const> params,
            std::span<const Tensor* const> grads);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return t_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  // checkpoint support
  void restore(std::int64_t t, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace esam

#endif  // ESAM_OPTIM_HPP
