#pragma once

#include <functional>
#include <vector>

#include "mfatdnn/nn/gradcheck.hpp"
#include "mfatdnn/nn/param.hpp"
#include "mfatdnn/nn/tensor.hpp"
#include "mfatdnn/rng.hpp"

namespace testutil {

using mfatdnn::Rng;
using mfatdnn::nn::GradCheckResult;
using mfatdnn::nn::ParamStore;
using mfatdnn::nn::Shape;
using mfatdnn::nn::Tensor;

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(scale * rng.normal());
  return t;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.vec()[i] * b.vec()[i];
  return s;
}

inline GradCheckResult check_module(const std::function<Tensor<double>(const Tensor<double>&)>& fwd,
                                    const std::function<Tensor<double>(const Tensor<double>&)>& bwd,
                                    const ParamStore<double>& store, Tensor<double>& x, Rng rng,
                                    bool check_input = true,
                                    const mfatdnn::nn::GradCheckOptions& opt = {}) {
  return mfatdnn::nn::check_module_gradients(fwd, bwd, store, x, rng, check_input, opt);
}

}  // namespace testutil
