#pragma once

#include <string>

#include "mfatdnn/nn/layers.hpp"

namespace mfatdnn::nn {

// conv -> batchnorm -> relu over [N, C, D, L].
template <typename T>
struct ConvBnRelu2d {
  ConvBnRelu2d() = default;
  explicit ConvBnRelu2d(const LayerSpec& spec) : conv(spec), bn(spec.out_channels) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return act.forward(bn.forward(conv.forward(x), mode)); }
  Tensor<T> backward(const Tensor<T>& gy) { return conv.backward(bn.backward(act.backward(gy))); }
  void collect(ParamStore<T>& store, const std::string& prefix) {
    conv.collect(store, prefix + ".conv");
    bn.collect(store, prefix + ".bn");
  }

  Conv2d<T> conv;
  BatchNorm<T> bn;
  Relu<T> act;
};

// conv -> batchnorm -> relu over [N, C, L].
template <typename T>
struct ConvBnRelu1d {
  ConvBnRelu1d() = default;
  explicit ConvBnRelu1d(const LayerSpec& spec) : conv(spec), bn(spec.out_channels) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return act.forward(bn.forward(conv.forward(x), mode)); }
  Tensor<T> backward(const Tensor<T>& gy) { return conv.backward(bn.backward(act.backward(gy))); }
  void collect(ParamStore<T>& store, const std::string& prefix) {
    conv.collect(store, prefix + ".conv");
    bn.collect(store, prefix + ".bn");
  }

  Conv1d<T> conv;
  BatchNorm<T> bn;
  Relu<T> act;
};

// ECAPA frame layer: conv -> relu -> batchnorm.
template <typename T>
struct TdnnBlock {
  TdnnBlock() = default;
  TdnnBlock(std::size_t in, std::size_t out, std::size_t kernel, std::size_t dilation = 1)
      : conv(in, out, kernel, dilation), bn(out) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return bn.forward(act.forward(conv.forward(x)), mode); }
  Tensor<T> backward(const Tensor<T>& gy) { return conv.backward(act.backward(bn.backward(gy))); }
  void collect(ParamStore<T>& store, const std::string& prefix) {
    conv.collect(store, prefix + ".conv");
    bn.collect(store, prefix + ".bn");
  }
  std::uint64_t macs(std::size_t length) const { return conv.macs(length); }

  Conv1d<T> conv;
  Relu<T> act;
  BatchNorm<T> bn;
};

}  // namespace mfatdnn::nn
