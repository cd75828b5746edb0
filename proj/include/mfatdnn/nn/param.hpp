#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfatdnn/nn/tensor.hpp"
#include "mfatdnn/rng.hpp"

namespace mfatdnn::nn {

enum class Mode { kTrain, kEval };

enum class Init { kFanInUniform, kOnes, kZeros };

template <typename T>
struct Param {
  Param() = default;
  Param(Shape shape, Init init, std::size_t fan_in = 1, bool buffer = false)
      : value(shape), grad(buffer ? Tensor<T>() : Tensor<T>(shape)), init(init), fan_in(fan_in),
        buffer(buffer) {}

  Tensor<T> value;
  Tensor<T> grad;
  Init init = Init::kZeros;
  std::size_t fan_in = 1;
  // Buffers (batchnorm running statistics) are persisted but neither counted
  // nor optimized.
  bool buffer = false;
  // Frozen parameters never receive gradient.
  bool frozen = false;

  bool trainable() const { return !buffer && !frozen; }
};

template <typename T>
struct ParamRef {
  std::string name;
  Param<T>* param;
};

// Insertion-ordered view over a model's parameters. Checkpoints and optimizer
// state rely on this order being deterministic.
template <typename T>
class ParamStore {
 public:
  void add(std::string name, Param<T>& p) { entries_.push_back({std::move(name), &p}); }

  const std::vector<ParamRef<T>>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  Param<T>* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.param;
    return nullptr;
  }

  // Learnable element count (batchnorm running stats excluded).
  std::uint64_t count_params() const {
    std::uint64_t n = 0;
    for (const auto& e : entries_)
      if (!e.param->buffer) n += e.param->value.numel();
    return n;
  }

  void zero_grad() const {
    for (const auto& e : entries_)
      if (!e.param->buffer) e.param->grad.fill(T(0));
  }

 private:
  std::vector<ParamRef<T>> entries_;
};

// Weights ~ U(-a, a) with a = fan_in^-1/2; each parameter draws from a stream
// keyed by its name so initialization does not depend on traversal details.
template <typename T>
void init_params(const ParamStore<T>& store, const Rng& rng) {
  for (const auto& e : store) {
    Param<T>& p = *e.param;
    switch (p.init) {
      case Init::kOnes:
        p.value.fill(T(1));
        break;
      case Init::kZeros:
        p.value.fill(T(0));
        break;
      case Init::kFanInUniform: {
        Rng r = rng.split(e.name);
        const double a = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
        for (auto& v : p.value.vec()) v = static_cast<T>(r.uniform(-a, a));
        break;
      }
    }
    if (!p.buffer) p.grad.fill(T(0));
  }
}

}  // namespace mfatdnn::nn
