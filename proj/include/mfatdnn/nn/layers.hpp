#pragma once

#include <cstdint>
#include <string>

#include "mfatdnn/nn/param.hpp"
#include "mfatdnn/nn/tensor.hpp"

// Layer kernels with explicit forward/backward passes. Each layer caches what
// its backward pass needs during forward; parameter gradients accumulate into
// Param::grad until the caller zeroes them.
namespace mfatdnn::nn {

enum class LayerKind { kConv1d, kConv2d, kBatchNorm, kLinear, kActivation };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv1d;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_f = 1;  // conv2d only
  std::size_t kernel_t = 1;
  std::size_t dilation = 1;
  std::size_t stride_f = 1;  // conv2d only
  std::size_t stride_t = 1;
  bool has_bias = true;

  static LayerSpec conv1d(std::size_t in, std::size_t out, std::size_t kernel,
                          std::size_t dilation = 1, bool bias = true);
  static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t kernel = 3,
                          std::size_t stride_f = 1, std::size_t stride_t = 1, bool bias = true);
  void validate() const;
};

// "Same" zero padding, output length equals input length. Input [N, Cin, L].
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  explicit Conv1d(const LayerSpec& spec);
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t dilation = 1,
         bool bias = true)
      : Conv1d(LayerSpec::conv1d(in, out, kernel, dilation, bias)) {}

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& gy);
  void collect(ParamStore<T>& store, const std::string& prefix);
  std::uint64_t macs(std::size_t length) const;
  const LayerSpec& spec() const { return spec_; }

  Param<T> weight;  // [Cout, Cin, K]
  Param<T> bias;    // [Cout], empty without bias

 private:
  LayerSpec spec_;
  Tensor<T> x_;
  bool cached_ = false;
};

// 2-D cross-correlation over [N, Cin, D, L]. Padding is (k-1)/2 per side before
// striding, so D' = ceil(D / stride_f) and L' = ceil(L / stride_t).
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  explicit Conv2d(const LayerSpec& spec);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& gy);
  void collect(ParamStore<T>& store, const std::string& prefix);
  std::uint64_t macs(std::size_t freq, std::size_t length) const;
  std::size_t out_freq(std::size_t freq) const { return (freq + spec_.stride_f - 1) / spec_.stride_f; }
  std::size_t out_length(std::size_t len) const { return (len + spec_.stride_t - 1) / spec_.stride_t; }
  const LayerSpec& spec() const { return spec_; }

  Param<T> weight;  // [Cout, Cin, Kf, Kt]
  Param<T> bias;

 private:
  LayerSpec spec_;
  Tensor<T> x_;
  bool cached_ = false;
};

// Per-channel normalization over every axis except axis 1. Accepts rank 2, 3
// or 4 input. Running statistics follow r <- momentum * r + (1 - momentum) * b.
template <typename T>
class BatchNorm {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& gy);
  void collect(ParamStore<T>& store, const std::string& prefix);
  std::size_t channels() const { return channels_; }

  Param<T> gamma;
  Param<T> beta;
  Param<T> running_mean;
  Param<T> running_var;

 private:
  std::size_t channels_ = 0;
  Mode mode_ = Mode::kEval;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
  bool cached_ = false;
};

// [N, Cin] -> [N, Cout].
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool bias = true);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& gy);
  void collect(ParamStore<T>& store, const std::string& prefix);
  std::uint64_t macs() const { return static_cast<std::uint64_t>(in_) * out_; }

  Param<T> weight;  // [Cout, Cin]
  Param<T> bias;

 private:
  std::size_t in_ = 0, out_ = 0;
  bool has_bias_ = true;
  Tensor<T> x_;
  bool cached_ = false;
};

template <typename T>
class Relu {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& gy);

 private:
  Tensor<T> y_;
  bool cached_ = false;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& gy);

 private:
  Tensor<T> y_;
  bool cached_ = false;
};

template <typename T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& gy);

 private:
  Tensor<T> y_;
  bool cached_ = false;
};

// Stateless helpers.

template <typename T>
T sigmoid(T x);

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& gy, std::size_t axis);

// Mean over the last axis: [..., L] -> [...].
template <typename T>
Tensor<T> mean_last_axis(const Tensor<T>& x);
// Broadcast gy / L back over a last axis of length L.
template <typename T>
Tensor<T> mean_last_axis_backward(const Tensor<T>& gy, std::size_t length);

// Concatenate / split along axis 1 (channels).
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count);
template <typename T>
void add_slice_channels(Tensor<T>& dst, const Tensor<T>& src, std::size_t begin);

}  // namespace mfatdnn::nn
