#include "mfatdnn/frontend/mfa.hpp"

namespace mfatdnn::frontend {

using nn::Mode;
using nn::Shape;
using nn::Tensor;

MfaConfig MfaConfig::standard() { return MfaConfig{}; }

MfaConfig MfaConfig::lite() {
  MfaConfig c;
  c.channels = 24;
  c.out_channels = 480;
  return c;
}

void MfaConfig::validate() const {
  if (scale == 0 || channels == 0 || channels % scale != 0)
    throw ConfigError("MFA channels C=" + std::to_string(channels) +
                      " not divisible by scale s=" + std::to_string(scale));
  if (stem.empty()) throw ConfigError("MFA stem needs at least one layer");
  std::size_t total = 1;
  for (const auto& l : stem) {
    if (l.stride_f == 0 || l.stride_t != 1)
      throw ConfigError("MFA stem must preserve time (stride_t == 1) with stride_f >= 1");
    total *= l.stride_f;
  }
  if (mel_bins % total != 0)
    throw ConfigError("mel bins D=" + std::to_string(mel_bins) +
                      " not divisible by stem frequency stride " + std::to_string(total));
  if (reduction == 0) throw ConfigError("FA reduction ratio must be >= 1");
  if (out_channels == 0) throw ConfigError("C_E must be positive");
  if (tdnn_kernel % 2 == 0) throw ConfigError("TDNN pathway kernel must be odd");
}

std::size_t MfaConfig::reduced_freq() const {
  std::size_t d = mel_bins;
  for (const auto& l : stem) d /= l.stride_f;
  return d;
}

std::size_t MfaConfig::fa_hidden() const { return std::max<std::size_t>(1, flat_width() / reduction); }

// ---------------------------------------------------------------- free ops

template <typename T>
std::vector<Tensor<T>> split_scales(const Tensor<T>& y, std::size_t scale) {
  if (y.rank() < 2) throw ShapeError("split_scales expects a channel axis");
  if (scale == 0 || y.dim(1) % scale != 0)
    throw ConfigError("cannot split " + std::to_string(y.dim(1)) + " channels into " +
                      std::to_string(scale) + " scales");
  const std::size_t n = y.dim(1) / scale;
  std::vector<Tensor<T>> groups;
  groups.reserve(scale);
  for (std::size_t i = 0; i < scale; ++i) groups.push_back(nn::slice_channels(y, i * n, n));
  return groups;
}

template <typename T>
Tensor<T> fa_squeeze(const Tensor<T>& y) {
  if (y.rank() != 4) throw ShapeError("fa_squeeze expects [N,n,D',L], got " + y.shape().str());
  Tensor<T> d = nn::mean_last_axis(y);  // [N, n, D']
  return std::move(d).reshaped({y.dim(0), y.dim(1) * y.dim(2)});
}

template <typename T>
Tensor<T> fa_apply(const Tensor<T>& y, const Tensor<T>& gates) {
  if (y.rank() != 4) throw ShapeError("fa_apply expects [N,n,D',L], got " + y.shape().str());
  const std::size_t n_batch = y.dim(0), width = y.dim(1) * y.dim(2), len = y.dim(3);
  if (gates.rank() != 2 || gates.dim(0) != n_batch || gates.dim(1) != width)
    throw ShapeError("fa_apply: gate shape " + gates.shape().str() + " does not match " +
                     y.shape().str());
  Tensor<T> out(y.shape());
  for (std::size_t b = 0; b < n_batch; ++b)
    for (std::size_t cf = 0; cf < width; ++cf) {
      const T g = gates.at(b, cf);
      const T* src = y.data() + (b * width + cf) * len;
      T* dst = out.data() + (b * width + cf) * len;
      for (std::size_t t = 0; t < len; ++t) dst[t] = src[t] * g;
    }
  return out;
}

// ----------------------------------------------------------------- FaBlock

template <typename T>
FaBlock<T>::FaBlock(std::size_t width, std::size_t hidden) : fc1(width, hidden), fc2(hidden, width) {}

template <typename T>
Tensor<T> FaBlock<T>::excite(const Tensor<T>& descriptor) {
  return sigmoid_.forward(fc2.forward(relu_.forward(fc1.forward(descriptor))));
}

template <typename T>
Tensor<T> FaBlock<T>::excite_backward(const Tensor<T>& g_gates) {
  return fc1.backward(relu_.backward(fc2.backward(sigmoid_.backward(g_gates))));
}

template <typename T>
Tensor<T> FaBlock<T>::forward(const Tensor<T>& y) {
  gates_ = excite(fa_squeeze(y));
  y_ = y;
  return fa_apply(y, gates_);
}

template <typename T>
Tensor<T> FaBlock<T>::backward(const Tensor<T>& g_out) {
  if (y_.empty()) throw StateError("FA block: backward called before forward");
  y_.require_same_shape(g_out, "FA block backward");
  const std::size_t n_batch = y_.dim(0), width = y_.dim(1) * y_.dim(2), len = y_.dim(3);
  Tensor<T> g_gates({n_batch, width});
  for (std::size_t b = 0; b < n_batch; ++b)
    for (std::size_t cf = 0; cf < width; ++cf) {
      const T* go = g_out.data() + (b * width + cf) * len;
      const T* yv = y_.data() + (b * width + cf) * len;
      double acc = 0;
      for (std::size_t t = 0; t < len; ++t) acc += static_cast<double>(go[t]) * yv[t];
      g_gates.at(b, cf) = static_cast<T>(acc);
    }
  Tensor<T> g_y = fa_apply(g_out, gates_);
  const Tensor<T> g_desc = excite_backward(g_gates);
  // The descriptor is a time mean, so its gradient spreads evenly over frames.
  const T inv = T(1) / static_cast<T>(len);
  for (std::size_t b = 0; b < n_batch; ++b)
    for (std::size_t cf = 0; cf < width; ++cf) {
      const T g = g_desc.at(b, cf) * inv;
      T* dst = g_y.data() + (b * width + cf) * len;
      for (std::size_t t = 0; t < len; ++t) dst[t] += g;
    }
  return g_y;
}

template <typename T>
void FaBlock<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  fc1.collect(store, prefix + ".fc1");
  fc2.collect(store, prefix + ".fc2");
}

// --------------------------------------------------------------- ScaleUnit

template <typename T>
ScaleUnit<T>::ScaleUnit(std::size_t group_channels, std::size_t reduced_freq, std::size_t hidden,
                        std::size_t tdnn_kernel)
    : cnn(nn::LayerSpec::conv2d(group_channels, group_channels, 3, 1, 1)),
      fa(group_channels * reduced_freq, hidden),
      tdnn(nn::LayerSpec::conv1d(group_channels * reduced_freq, group_channels * reduced_freq,
                                 tdnn_kernel)),
      n_(group_channels),
      freq_(reduced_freq) {}

template <typename T>
Tensor<T> ScaleUnit<T>::cnn_path_step(const Tensor<T>& x, const Tensor<T>* y_prev, Mode mode) {
  if (y_prev == nullptr) return cnn.forward(x, mode);
  x.require_same_shape(*y_prev, "CNN pathway step");
  return cnn.forward(x + *y_prev, mode);
}

template <typename T>
Tensor<T> ScaleUnit<T>::tdnn_path_step(const Tensor<T>& f, const Tensor<T>* z_prev, Mode mode) {
  if (f.rank() != 3 || f.dim(1) != n_ * freq_)
    throw ShapeError("TDNN pathway expects [N," + std::to_string(n_ * freq_) + ",L], got " +
                     f.shape().str());
  if (z_prev == nullptr) return tdnn.forward(f, mode);
  f.require_same_shape(*z_prev, "TDNN pathway step");
  return tdnn.forward(f + *z_prev, mode);
}

template <typename T>
void ScaleUnit<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  cnn.collect(store, prefix + ".cnn");
  fa.collect(store, prefix + ".fa");
  tdnn.collect(store, prefix + ".tdnn");
}

// ------------------------------------------------------------- MfaFrontend

template <typename T>
MfaFrontend<T>::MfaFrontend(const MfaConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::size_t in = 1;
  for (const auto& l : cfg_.stem) {
    stem.emplace_back(nn::LayerSpec::conv2d(in, cfg_.channels, 3, l.stride_f, l.stride_t));
    in = cfg_.channels;
  }
  for (std::size_t i = 0; i < cfg_.scale; ++i)
    units.emplace_back(cfg_.group_channels(), cfg_.reduced_freq(), cfg_.fa_hidden(),
                       cfg_.tdnn_kernel);
  fusion = nn::ConvBnRelu1d<T>(
      nn::LayerSpec::conv1d(cfg_.scale * cfg_.flat_width(), cfg_.out_channels, 1));
}

template <typename T>
Tensor<T> MfaFrontend<T>::stem_forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.mel_bins)
    throw ShapeError("MFA expects [N,1," + std::to_string(cfg_.mel_bins) + ",L], got " +
                     x.shape().str());
  Tensor<T> h = x;
  for (auto& layer : stem) h = layer.forward(h, mode);
  return h;
}

template <typename T>
Tensor<T> MfaFrontend<T>::fuse_scales(const std::vector<Tensor<T>>& z, Mode mode) {
  if (z.size() != cfg_.scale) throw ShapeError("fuse_scales: wrong number of scales");
  return fusion.forward(nn::concat_channels<T>(z), mode);
}

template <typename T>
Tensor<T> MfaFrontend<T>::forward(const Tensor<T>& x, Mode mode) {
  const Tensor<T> h = stem_forward(x, mode);
  const std::size_t n_batch = h.dim(0), len = h.dim(3);
  const std::size_t s = cfg_.scale, flat = cfg_.flat_width();

  state_ = DmState<T>{};
  state_.x = split_scales(h, s);
  for (std::size_t i = 0; i < s; ++i) {
    ScaleUnit<T>& u = units[i];
    state_.y.push_back(u.cnn_path_step(state_.x[i], i ? &state_.y[i - 1] : nullptr, mode));
    Tensor<T> f = u.fa.forward(state_.y[i]).reshaped({n_batch, flat, len});
    state_.gates.push_back(u.fa.gates());
    state_.z.push_back(u.tdnn_path_step(f, i ? &state_.z[i - 1] : nullptr, mode));
  }
  length_ = len;
  cached_ = true;
  return fuse_scales(state_.z, mode);
}

template <typename T>
Tensor<T> MfaFrontend<T>::backward(const Tensor<T>& g_out) {
  if (!cached_) throw StateError("MFA: backward called before forward");
  const std::size_t s = cfg_.scale, flat = cfg_.flat_width();
  const Tensor<T> g_cat = fusion.backward(g_out);
  const std::size_t n_batch = g_cat.dim(0);

  std::vector<Tensor<T>> g_x(s);
  Tensor<T> carry_z, carry_y;
  for (std::size_t k = s; k-- > 0;) {
    ScaleUnit<T>& u = units[k];
    Tensor<T> g_z = nn::slice_channels(g_cat, k * flat, flat);
    if (!carry_z.empty()) g_z += carry_z;
    Tensor<T> g_v = u.tdnn.backward(g_z);
    carry_z = g_v;
    Tensor<T> g_a = std::move(g_v).reshaped(
        {n_batch, cfg_.group_channels(), cfg_.reduced_freq(), length_});
    Tensor<T> g_y = u.fa.backward(g_a);
    if (!carry_y.empty()) g_y += carry_y;
    Tensor<T> g_u = u.cnn.backward(g_y);
    carry_y = g_u;
    g_x[k] = std::move(g_u);
  }
  Tensor<T> g = nn::concat_channels<T>(g_x);
  for (std::size_t l = stem.size(); l-- > 0;) g = stem[l].backward(g);
  return g;
}

template <typename T>
void MfaFrontend<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  for (std::size_t l = 0; l < stem.size(); ++l) stem[l].collect(store, prefix + ".stem" + std::to_string(l));
  for (std::size_t i = 0; i < units.size(); ++i)
    units[i].collect(store, prefix + ".scale" + std::to_string(i + 1));
  fusion.collect(store, prefix + ".fusion");
}

template <typename T>
void MfaFrontend<T>::trace_macs(nn::MacTrace& trace, const std::string& prefix,
                                std::size_t length) const {
  std::size_t freq = cfg_.mel_bins;
  for (std::size_t l = 0; l < stem.size(); ++l) {
    trace.push_back({prefix + ".stem" + std::to_string(l), stem[l].conv.macs(freq, length)});
    freq = stem[l].conv.out_freq(freq);
  }
  for (std::size_t i = 0; i < units.size(); ++i) {
    const std::string p = prefix + ".scale" + std::to_string(i + 1);
    trace.push_back({p + ".cnn", units[i].cnn.conv.macs(freq, length)});
    trace.push_back({p + ".fa", units[i].fa.macs()});
    trace.push_back({p + ".tdnn", units[i].tdnn.conv.macs(length)});
  }
  trace.push_back({prefix + ".fusion", fusion.conv.macs(length)});
}

#define MFATDNN_INSTANTIATE(T)                                                       \
  template std::vector<Tensor<T>> split_scales<T>(const Tensor<T>&, std::size_t);    \
  template Tensor<T> fa_squeeze<T>(const Tensor<T>&);                                \
  template Tensor<T> fa_apply<T>(const Tensor<T>&, const Tensor<T>&);                \
  template class FaBlock<T>;                                                         \
  template class ScaleUnit<T>;                                                       \
  template class MfaFrontend<T>;

MFATDNN_INSTANTIATE(float)
MFATDNN_INSTANTIATE(double)

}  // namespace mfatdnn::frontend
