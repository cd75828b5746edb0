#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mfatdnn/nn/blocks.hpp"
#include "mfatdnn/nn/complexity.hpp"

// Multi-scale frequency-channel attention front-end.
//
// A 2-D stem maps the 1 x D x L filterbank map to C x D' x L. The channels
// are split into s groups of n = C / s. Each group i runs two hierarchical
// pathways:
//
//   y_i = relu(bn(conv2d_3x3(x_i + y_{i-1})))          y_0 = 0
//   a_i = y_i * sigmoid(W2 relu(W1 GAP_t(y_i)))        frequency-channel gate
//   z_i = relu(bn(conv1d_k3(flatten(a_i) + z_{i-1})))  z_0 = 0
//
// and a kernel-1 conv fuses concat(z_1..z_s) into the C_E x L frame map that
// replaces the backbone's first frame layer.
namespace mfatdnn::frontend {

struct StemLayer {
  std::size_t stride_f = 2;
  std::size_t stride_t = 1;
};

struct MfaConfig {
  std::size_t channels = 32;  // C
  std::size_t scale = 4;      // s
  std::size_t reduction = 8;  // FA bottleneck ratio r
  std::size_t out_channels = 512;  // C_E
  std::size_t mel_bins = 80;  // D
  std::vector<StemLayer> stem{{2, 1}, {2, 1}};
  std::size_t tdnn_kernel = 3;

  static MfaConfig standard();
  static MfaConfig lite();

  void validate() const;
  std::size_t group_channels() const { return channels / scale; }  // n
  std::size_t reduced_freq() const;                                 // D'
  std::size_t flat_width() const { return group_channels() * reduced_freq(); }  // n * D'
  std::size_t fa_hidden() const;
};

// Intermediate maps of the last forward pass, index i = scale i + 1.
template <typename T>
struct DmState {
  std::vector<nn::Tensor<T>> x;      // split stem output, [N, n, D', L]
  std::vector<nn::Tensor<T>> y;      // CNN pathway outputs
  std::vector<nn::Tensor<T>> gates;  // FA gates, [N, n*D']
  std::vector<nn::Tensor<T>> z;      // TDNN pathway outputs, [N, n*D', L]
};

template <typename T>
std::vector<nn::Tensor<T>> split_scales(const nn::Tensor<T>& y, std::size_t scale);

// GAP over time then channel-major flatten: [N, n, D', L] -> [N, n*D'].
template <typename T>
nn::Tensor<T> fa_squeeze(const nn::Tensor<T>& y);

// out[c, f, t] = y[c, f, t] * gate[c * D' + f].
template <typename T>
nn::Tensor<T> fa_apply(const nn::Tensor<T>& y, const nn::Tensor<T>& gates);

template <typename T>
class FaBlock {
 public:
  FaBlock() = default;
  FaBlock(std::size_t width, std::size_t hidden);

  // [N, width] descriptor -> [N, width] gates in (0, 1).
  nn::Tensor<T> excite(const nn::Tensor<T>& descriptor);
  nn::Tensor<T> excite_backward(const nn::Tensor<T>& g_gates);

  // squeeze -> excite -> apply. Returns the re-weighted map.
  nn::Tensor<T> forward(const nn::Tensor<T>& y);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);
  const nn::Tensor<T>& gates() const { return gates_; }

  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  std::uint64_t macs() const { return fc1.macs() + fc2.macs(); }

  nn::Linear<T> fc1;
  nn::Linear<T> fc2;

 private:
  nn::Relu<T> relu_;
  nn::Sigmoid<T> sigmoid_;
  nn::Tensor<T> y_;
  nn::Tensor<T> gates_;
};

// One scale group: CNN pathway conv, FA block and TDNN pathway conv.
template <typename T>
class ScaleUnit {
 public:
  ScaleUnit() = default;
  ScaleUnit(std::size_t group_channels, std::size_t reduced_freq, std::size_t hidden,
            std::size_t tdnn_kernel);

  // y_i = relu(bn(conv(x_i + y_prev))); y_prev == nullptr means y_0 = 0.
  nn::Tensor<T> cnn_path_step(const nn::Tensor<T>& x, const nn::Tensor<T>* y_prev, nn::Mode mode);
  // z_i = relu(bn(conv(f_i + z_prev))).
  nn::Tensor<T> tdnn_path_step(const nn::Tensor<T>& f, const nn::Tensor<T>* z_prev, nn::Mode mode);

  void collect(nn::ParamStore<T>& store, const std::string& prefix);

  nn::ConvBnRelu2d<T> cnn;
  FaBlock<T> fa;
  nn::ConvBnRelu1d<T> tdnn;

 private:
  std::size_t n_ = 0, freq_ = 0;
};

template <typename T>
class MfaFrontend {
 public:
  MfaFrontend() = default;
  explicit MfaFrontend(const MfaConfig& cfg);

  // [N, 1, D, L] -> [N, C_E, L].
  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);

  // Stem only: [N, 1, D, L] -> [N, C, D', L].
  nn::Tensor<T> stem_forward(const nn::Tensor<T>& x, nn::Mode mode);
  // Concatenate z_1..z_s and fuse to [N, C_E, L].
  nn::Tensor<T> fuse_scales(const std::vector<nn::Tensor<T>>& z, nn::Mode mode);

  const DmState<T>& state() const { return state_; }
  const MfaConfig& config() const { return cfg_; }

  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  void trace_macs(nn::MacTrace& trace, const std::string& prefix, std::size_t length) const;

  std::vector<nn::ConvBnRelu2d<T>> stem;
  std::vector<ScaleUnit<T>> units;
  nn::ConvBnRelu1d<T> fusion;

 private:
  MfaConfig cfg_;
  DmState<T> state_;
  std::size_t length_ = 0;
  bool cached_ = false;
};

}  // namespace mfatdnn::frontend
