#pragma once

#include <array>
#include <string>
#include <vector>

#include "mfatdnn/nn/blocks.hpp"
#include "mfatdnn/nn/complexity.hpp"

namespace mfatdnn::backbone {

// Hierarchical dilated TDNN over `scale` channel chunks:
// y_0 = x_0, y_1 = f_1(x_1), y_i = f_i(x_i + y_{i-1}).
template <typename T>
class Res2NetBlock {
 public:
  Res2NetBlock() = default;
  Res2NetBlock(std::size_t channels, std::size_t scale, std::size_t kernel, std::size_t dilation);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);
  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  std::uint64_t macs(std::size_t length) const;

  std::vector<nn::TdnnBlock<T>> blocks;  // scale - 1 of them

 private:
  std::size_t scale_ = 8, width_ = 0;
};

// Channel-only squeeze-excitation with a time-GAP descriptor.
template <typename T>
class SeBlock {
 public:
  SeBlock() = default;
  SeBlock(std::size_t channels, std::size_t bottleneck);

  nn::Tensor<T> forward(const nn::Tensor<T>& x);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);
  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  std::uint64_t macs() const { return fc1.macs() + fc2.macs(); }

  nn::Linear<T> fc1;
  nn::Linear<T> fc2;

 private:
  nn::Relu<T> relu_;
  nn::Sigmoid<T> sigmoid_;
  nn::Tensor<T> x_;
  nn::Tensor<T> gates_;
};

// conv1 -> Res2Net TDNN -> conv1 -> SE, plus identity residual.
template <typename T>
class SeRes2Block {
 public:
  SeRes2Block() = default;
  SeRes2Block(std::size_t channels, std::size_t res2_scale, std::size_t se_channels,
              std::size_t kernel, std::size_t dilation);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);
  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  std::uint64_t macs(std::size_t length) const;

  nn::TdnnBlock<T> tdnn1;
  Res2NetBlock<T> res2net;
  nn::TdnnBlock<T> tdnn2;
  SeBlock<T> se;

 private:
  std::size_t channels_ = 0;
};

// Attentive statistics pooling with global context: [N, C, L] -> [N, 2C].
template <typename T>
class AttentiveStatsPool {
 public:
  static constexpr double kVarFloor = 1e-9;

  AttentiveStatsPool() = default;
  AttentiveStatsPool(std::size_t channels, std::size_t attention);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);
  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  std::uint64_t macs(std::size_t length) const;
  // Attention weights of the last forward pass, [N, C, L].
  const nn::Tensor<T>& weights() const { return alpha_; }

  nn::TdnnBlock<T> attention;
  nn::Conv1d<T> score;

 private:
  std::size_t channels_ = 0;
  nn::Tanh<T> tanh_;
  nn::Tensor<T> x_, alpha_;
  std::vector<double> mean_u_, var_u_, mean_w_, var_w_;
};

struct BackboneConfig {
  std::size_t channels = 512;  // C_E
  std::size_t res2_scale = 8;
  std::size_t kernel = 3;
  std::array<std::size_t, 3> dilations{2, 3, 4};
  std::size_t se_channels = 128;
  std::size_t attention_channels = 128;
  std::size_t embed_dim = 192;

  std::size_t aggregate_channels() const { return 3 * channels; }
  void validate() const;
};

// Three SE-Res2Blocks, multi-layer aggregation, ASP, batchnorm and the
// embedding projection: [N, C_E, L] -> [N, embed_dim].
template <typename T>
class EcapaBackbone {
 public:
  EcapaBackbone() = default;
  explicit EcapaBackbone(const BackboneConfig& cfg);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);
  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  void trace_macs(nn::MacTrace& trace, const std::string& prefix, std::size_t length) const;

  std::vector<SeRes2Block<T>> blocks;
  nn::TdnnBlock<T> aggregate;
  AttentiveStatsPool<T> pool;
  nn::BatchNorm<T> pool_bn;
  nn::Linear<T> embed;

 private:
  BackboneConfig cfg_;
};

}  // namespace mfatdnn::backbone
