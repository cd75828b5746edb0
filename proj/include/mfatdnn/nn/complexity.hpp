#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfatdnn/nn/param.hpp"

namespace mfatdnn::nn {

// One multiply-accumulate per MAC; activations, batchnorm and pooling cost 0.
struct MacEntry {
  std::string name;
  std::uint64_t macs = 0;
};

using MacTrace = std::vector<MacEntry>;

inline std::uint64_t total_macs(const MacTrace& trace) {
  std::uint64_t n = 0;
  for (const auto& e : trace) n += e.macs;
  return n;
}

template <typename T>
std::uint64_t count_params(const ParamStore<T>& store) {
  return store.count_params();
}

// Learnable elements whose name starts with `prefix`.
template <typename T>
std::uint64_t count_params(const ParamStore<T>& store, const std::string& prefix) {
  std::uint64_t n = 0;
  for (const auto& e : store)
    if (!e.param->buffer && e.name.compare(0, prefix.size(), prefix) == 0)
      n += e.param->value.numel();
  return n;
}

}  // namespace mfatdnn::nn
