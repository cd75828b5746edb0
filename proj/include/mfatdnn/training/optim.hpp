#pragma once

#include <cstdint>
#include <vector>

#include "mfatdnn/nn/param.hpp"

namespace mfatdnn::training {

// Triangular cyclical learning rate: lr_min at the start of each cycle,
// lr_max at its midpoint, linear in between.
struct CyclicLrSchedule {
  double lr_min = 1e-8;
  double lr_max = 1e-3;
  std::uint64_t cycle_steps = 2;

  void validate() const;
};

double cyclical_lr(std::uint64_t step, const CyclicLrSchedule& s);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 2e-5;  // decoupled, applied after the Adam update
};

// Bias-corrected Adam over the trainable entries of a ParamStore, followed by
// p <- p * (1 - lr * weight_decay).
template <typename T>
class Adam {
 public:
  Adam(const nn::ParamStore<T>& store, const AdamConfig& cfg = {});

  // Throws NumericError naming the first parameter with a non-finite
  // gradient; nothing is updated in that case.
  void step(double lr);
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const nn::Tensor<T>& first_moment(std::size_t i) const { return m_[i]; }
  const nn::Tensor<T>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  const nn::ParamStore<T>* store_;
  AdamConfig cfg_;
  std::vector<nn::Tensor<T>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace mfatdnn::training
