#include "mfatdnn/backbone/model.hpp"

#include <cmath>

namespace mfatdnn::backbone {

using nn::Mode;
using nn::Tensor;

std::string_view variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::kEcapaTdnn:
      return "ecapa-tdnn";
    case ModelVariant::kEcapaCnnTdnn:
      return "ecapa-cnn-tdnn";
    case ModelVariant::kMfaStandard:
      return "mfa-standard";
    case ModelVariant::kMfaLite:
      return "mfa-lite";
  }
  return "?";
}

ModelVariant parse_variant(std::string_view name) {
  for (ModelVariant v : kAllVariants)
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected ecapa-tdnn|ecapa-cnn-tdnn|mfa-standard|mfa-lite)");
}

ModelConfig ModelConfig::for_variant(ModelVariant v) {
  ModelConfig c;
  c.variant = v;
  switch (v) {
    case ModelVariant::kEcapaTdnn:
    case ModelVariant::kEcapaCnnTdnn:
      c.backbone.channels = 512;
      break;
    case ModelVariant::kMfaStandard:
      c.mfa = frontend::MfaConfig::standard();
      c.backbone.channels = c.mfa.out_channels;
      break;
    case ModelVariant::kMfaLite:
      c.mfa = frontend::MfaConfig::lite();
      c.backbone.channels = c.mfa.out_channels;
      break;
  }
  c.mfa.mel_bins = c.mel_bins;
  return c;
}

ModelConfig ModelConfig::toy(ModelVariant v, double width, std::size_t mfa_channels) {
  if (!(width > 0.0 && width <= 1.0)) throw ConfigError("width multiplier must be in (0, 1]");
  ModelConfig c = for_variant(v);
  const auto scaled = [width](std::size_t full, std::size_t multiple, std::size_t floor) {
    const auto units = static_cast<std::size_t>(std::lround(full * width / multiple));
    return std::max(floor, units * multiple);
  };
  const std::size_t res2 = c.backbone.res2_scale;
  c.backbone.channels = scaled(c.backbone.channels, res2, res2);
  c.backbone.se_channels = scaled(c.backbone.se_channels, 1, 8);
  c.backbone.attention_channels = scaled(c.backbone.attention_channels, 1, 8);
  c.cnn.channels = scaled(c.cnn.channels, 1, 4);
  c.mfa.out_channels = c.backbone.channels;
  if (v == ModelVariant::kMfaStandard || v == ModelVariant::kMfaLite) c.mfa.channels = mfa_channels;
  return c;
}

void ModelConfig::validate() const {
  backbone.validate();
  if (mel_bins == 0) throw ConfigError("mel_bins must be positive");
  if (variant == ModelVariant::kMfaStandard || variant == ModelVariant::kMfaLite) {
    mfa.validate();
    if (mfa.out_channels != backbone.channels)
      throw ConfigError("MFA output channels must equal backbone C_E");
    if (mfa.mel_bins != mel_bins) throw ConfigError("MFA mel bins must equal model mel bins");
  }
  if (variant == ModelVariant::kEcapaCnnTdnn) {
    std::size_t total = 1;
    for (std::size_t s : cnn.freq_strides) total *= (s == 0 ? 0 : s);
    if (total == 0 || mel_bins % total != 0)
      throw ConfigError("CNN front-end strides must divide mel bins");
  }
}

// ---------------------------------------------------------------- EcapaStem

template <typename T>
EcapaStem<T>::EcapaStem(std::size_t mel_bins, std::size_t channels, std::size_t kernel)
    : layer(mel_bins, channels, kernel), mel_bins_(mel_bins) {}

template <typename T>
Tensor<T> EcapaStem<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != mel_bins_)
    throw ShapeError("expected [N,1," + std::to_string(mel_bins_) + ",L], got " + x.shape().str());
  return layer.forward(x.reshaped({x.dim(0), mel_bins_, x.dim(3)}), mode);
}

template <typename T>
Tensor<T> EcapaStem<T>::backward(const Tensor<T>& g_out) {
  Tensor<T> g = layer.backward(g_out);
  return std::move(g).reshaped({g.dim(0), 1, mel_bins_, g.dim(2)});
}

template <typename T>
void EcapaStem<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  layer.collect(store, prefix + ".layer");
}

template <typename T>
void EcapaStem<T>::trace_macs(nn::MacTrace& trace, const std::string& prefix,
                              std::size_t length) const {
  trace.push_back({prefix + ".layer", layer.macs(length)});
}

// -------------------------------------------------------------- CnnFrontend

template <typename T>
CnnFrontend<T>::CnnFrontend(std::size_t mel_bins, const CnnFrontendConfig& cfg,
                            std::size_t out_channels)
    : mel_bins_(mel_bins) {
  std::size_t in = 1, freq = mel_bins;
  for (std::size_t s : cfg.freq_strides) {
    convs.emplace_back(nn::LayerSpec::conv2d(in, cfg.channels, 3, s, 1));
    in = cfg.channels;
    freq = convs.back().conv.out_freq(freq);
  }
  reduced_freq_ = freq;
  project = nn::TdnnBlock<T>(cfg.channels * freq, out_channels, 1);
}

template <typename T>
Tensor<T> CnnFrontend<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != mel_bins_)
    throw ShapeError("expected [N,1," + std::to_string(mel_bins_) + ",L], got " + x.shape().str());
  Tensor<T> h = x;
  for (auto& c : convs) h = c.forward(h, mode);
  conv_out_shape_ = h.shape();
  return project.forward(std::move(h).reshaped({x.dim(0), h.dim(1) * h.dim(2), x.dim(3)}), mode);
}

template <typename T>
Tensor<T> CnnFrontend<T>::backward(const Tensor<T>& g_out) {
  Tensor<T> g = project.backward(g_out).reshaped(conv_out_shape_);
  for (std::size_t i = convs.size(); i-- > 0;) g = convs[i].backward(g);
  return g;
}

template <typename T>
void CnnFrontend<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  for (std::size_t i = 0; i < convs.size(); ++i)
    convs[i].collect(store, prefix + ".conv" + std::to_string(i + 1));
  project.collect(store, prefix + ".project");
}

template <typename T>
void CnnFrontend<T>::trace_macs(nn::MacTrace& trace, const std::string& prefix,
                                std::size_t length) const {
  std::size_t freq = mel_bins_;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    trace.push_back({prefix + ".conv" + std::to_string(i + 1), convs[i].conv.macs(freq, length)});
    freq = convs[i].conv.out_freq(freq);
  }
  trace.push_back({prefix + ".project", project.macs(length)});
}

// -------------------------------------------------------------------- Model

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg), backbone_(cfg.backbone) {
  cfg_.validate();
  switch (cfg_.variant) {
    case ModelVariant::kEcapaTdnn:
      front_.template emplace<EcapaStem<T>>(cfg_.mel_bins, cfg_.backbone.channels,
                                            cfg_.first_kernel);
      break;
    case ModelVariant::kEcapaCnnTdnn:
      front_.template emplace<CnnFrontend<T>>(cfg_.mel_bins, cfg_.cnn, cfg_.backbone.channels);
      break;
    case ModelVariant::kMfaStandard:
    case ModelVariant::kMfaLite:
      front_.template emplace<frontend::MfaFrontend<T>>(cfg_.mfa);
      break;
  }
  std::visit([this](auto& f) { f.collect(store_, "front"); }, front_);
  backbone_.collect(store_, "backbone");
  init(Rng(0));
}

template <typename T>
Tensor<T> Model<T>::frontend_forward(const Tensor<T>& x, Mode mode) {
  return std::visit([&](auto& f) { return f.forward(x, mode); }, front_);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, Mode mode) {
  return backbone_.forward(frontend_forward(x, mode), mode);
}

template <typename T>
Tensor<T> Model<T>::backward(const Tensor<T>& g_out) {
  const Tensor<T> g = backbone_.backward(g_out);
  return std::visit([&](auto& f) { return f.backward(g); }, front_);
}

template <typename T>
nn::MacTrace Model<T>::trace_macs(std::size_t length) const {
  if (length == 0) throw ConfigError("MAC count needs L >= 1");
  nn::MacTrace trace;
  std::visit([&](const auto& f) { f.trace_macs(trace, "front", length); }, front_);
  backbone_.trace_macs(trace, "backbone", length);
  return trace;
}

template <typename T>
std::vector<T> embed(Model<T>& model, const Tensor<T>& feature_map) {
  if (feature_map.rank() != 3 || feature_map.dim(0) != 1)
    throw ShapeError("embed expects a [1,D,L] feature map, got " + feature_map.shape().str());
  const Tensor<T> x =
      feature_map.reshaped({1, 1, feature_map.dim(1), feature_map.dim(2)});
  return model.forward(x, Mode::kEval).vec();
}

template <typename Src, typename Dst>
void copy_params(const Model<Src>& src, Model<Dst>& dst) {
  const auto& a = src.params().entries();
  const auto& b = dst.params().entries();
  if (a.size() != b.size()) throw ShapeError("copy_params: parameter inventories differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || !(a[i].param->value.shape() == b[i].param->value.shape()))
      throw ShapeError("copy_params: mismatch at " + a[i].name);
    const auto& sv = a[i].param->value.vec();
    auto& dv = b[i].param->value.vec();
    for (std::size_t k = 0; k < sv.size(); ++k) dv[k] = static_cast<Dst>(sv[k]);
  }
}

template class EcapaStem<float>;
template class EcapaStem<double>;
template class CnnFrontend<float>;
template class CnnFrontend<double>;
template class Model<float>;
template class Model<double>;
template std::vector<float> embed<float>(Model<float>&, const Tensor<float>&);
template std::vector<double> embed<double>(Model<double>&, const Tensor<double>&);
template void copy_params<float, float>(const Model<float>&, Model<float>&);
template void copy_params<float, double>(const Model<float>&, Model<double>&);
template void copy_params<double, float>(const Model<double>&, Model<float>&);
template void copy_params<double, double>(const Model<double>&, Model<double>&);

}  // namespace mfatdnn::backbone
