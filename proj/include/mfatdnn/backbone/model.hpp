#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mfatdnn/backbone/ecapa.hpp"
#include "mfatdnn/frontend/mfa.hpp"

namespace mfatdnn::backbone {

enum class ModelVariant { kEcapaTdnn, kEcapaCnnTdnn, kMfaStandard, kMfaLite };

std::string_view variant_name(ModelVariant v);
ModelVariant parse_variant(std::string_view name);
inline constexpr std::array<ModelVariant, 4> kAllVariants{
    ModelVariant::kEcapaTdnn, ModelVariant::kEcapaCnnTdnn, ModelVariant::kMfaStandard,
    ModelVariant::kMfaLite};

struct CnnFrontendConfig {
  std::size_t channels = 128;
  std::array<std::size_t, 4> freq_strides{2, 1, 2, 1};
};

struct ModelConfig {
  ModelVariant variant = ModelVariant::kEcapaTdnn;
  std::size_t mel_bins = 80;
  std::size_t first_kernel = 5;  // ECAPA-TDNN's own first frame layer
  frontend::MfaConfig mfa;
  CnnFrontendConfig cnn;
  BackboneConfig backbone;

  // Full-width configuration of one of the four systems.
  static ModelConfig for_variant(ModelVariant v);
  // Reduced-width configuration for desk-scale training. Scales C_E, the SE
  // and attention bottlenecks and the CNN front-end width by `width`; the MFA
  // channel count is set separately because its group structure (n = C / s)
  // must stay intact.
  static ModelConfig toy(ModelVariant v, double width, std::size_t mfa_channels = 16);

  void validate() const;
};

// 1 x D x L front-end of the ECAPA-TDNN baseline: the k=5 frame layer.
template <typename T>
class EcapaStem {
 public:
  EcapaStem() = default;
  EcapaStem(std::size_t mel_bins, std::size_t channels, std::size_t kernel);
  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);
  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  void trace_macs(nn::MacTrace& trace, const std::string& prefix, std::size_t length) const;

  nn::TdnnBlock<T> layer;

 private:
  std::size_t mel_bins_ = 80;
};

// Four 3x3 conv layers, frequency-flattened and projected to C_E with a
// kernel-1 frame layer.
template <typename T>
class CnnFrontend {
 public:
  CnnFrontend() = default;
  CnnFrontend(std::size_t mel_bins, const CnnFrontendConfig& cfg, std::size_t out_channels);
  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);
  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  void trace_macs(nn::MacTrace& trace, const std::string& prefix, std::size_t length) const;
  std::size_t reduced_freq() const { return reduced_freq_; }

  std::vector<nn::ConvBnRelu2d<T>> convs;
  nn::TdnnBlock<T> project;

 private:
  std::size_t mel_bins_ = 80, reduced_freq_ = 20;
  nn::Shape conv_out_shape_;
};

template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // [N, 1, D, L] -> [N, embed_dim].
  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode);
  nn::Tensor<T> backward(const nn::Tensor<T>& g_out);

  // Front-end output of the last forward: [N, C_E, L].
  nn::Tensor<T> frontend_forward(const nn::Tensor<T>& x, nn::Mode mode);

  const nn::ParamStore<T>& params() const { return store_; }
  std::uint64_t count_params() const { return store_.count_params(); }
  nn::MacTrace trace_macs(std::size_t length) const;
  std::uint64_t count_macs(std::size_t length) const { return nn::total_macs(trace_macs(length)); }

  void init(const Rng& rng) { nn::init_params(store_, rng); }
  const ModelConfig& config() const { return cfg_; }

  frontend::MfaFrontend<T>* mfa() { return std::get_if<frontend::MfaFrontend<T>>(&front_); }
  EcapaBackbone<T>& backbone() { return backbone_; }

 private:
  ModelConfig cfg_;
  std::variant<EcapaStem<T>, CnnFrontend<T>, frontend::MfaFrontend<T>> front_;
  EcapaBackbone<T> backbone_;
  nn::ParamStore<T> store_;
};

// Convenience: embed one feature map [1, D, L] in eval mode.
template <typename T>
std::vector<T> embed(Model<T>& model, const nn::Tensor<T>& feature_map);

// Copy every parameter and buffer between models of identical structure.
template <typename Src, typename Dst>
void copy_params(const Model<Src>& src, Model<Dst>& dst);

}  // namespace mfatdnn::backbone
