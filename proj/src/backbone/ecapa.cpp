#include "mfatdnn/backbone/ecapa.hpp"

#include <cmath>

namespace mfatdnn::backbone {

using nn::Mode;
using nn::Tensor;

// ------------------------------------------------------------ Res2NetBlock

template <typename T>
Res2NetBlock<T>::Res2NetBlock(std::size_t channels, std::size_t scale, std::size_t kernel,
                              std::size_t dilation)
    : scale_(scale), width_(channels / scale) {
  if (scale < 2 || channels % scale != 0)
    throw ConfigError("Res2Net: channels " + std::to_string(channels) +
                      " not divisible by scale " + std::to_string(scale));
  for (std::size_t i = 1; i < scale; ++i) blocks.emplace_back(width_, width_, kernel, dilation);
}

template <typename T>
Tensor<T> Res2NetBlock<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 3 || x.dim(1) != scale_ * width_)
    throw ShapeError("Res2Net block expects [N," + std::to_string(scale_ * width_) + ",L], got " +
                     x.shape().str());
  std::vector<Tensor<T>> ys;
  ys.reserve(scale_);
  ys.push_back(nn::slice_channels(x, 0, width_));
  for (std::size_t i = 1; i < scale_; ++i) {
    Tensor<T> xi = nn::slice_channels(x, i * width_, width_);
    if (i >= 2) xi += ys[i - 1];
    ys.push_back(blocks[i - 1].forward(xi, mode));
  }
  return nn::concat_channels<T>(ys);
}

template <typename T>
Tensor<T> Res2NetBlock<T>::backward(const Tensor<T>& g_out) {
  std::vector<Tensor<T>> gx(scale_);
  Tensor<T> carry;
  for (std::size_t i = scale_; i-- > 1;) {
    Tensor<T> g = nn::slice_channels(g_out, i * width_, width_);
    if (!carry.empty()) g += carry;
    gx[i] = blocks[i - 1].backward(g);
    if (i >= 2) carry = gx[i];
  }
  gx[0] = nn::slice_channels(g_out, 0, width_);
  return nn::concat_channels<T>(gx);
}

template <typename T>
void Res2NetBlock<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(store, prefix + ".block" + std::to_string(i + 1));
}

template <typename T>
std::uint64_t Res2NetBlock<T>::macs(std::size_t length) const {
  std::uint64_t n = 0;
  for (const auto& b : blocks) n += b.macs(length);
  return n;
}

// ----------------------------------------------------------------- SeBlock

template <typename T>
SeBlock<T>::SeBlock(std::size_t channels, std::size_t bottleneck)
    : fc1(channels, bottleneck), fc2(bottleneck, channels) {}

template <typename T>
Tensor<T> SeBlock<T>::forward(const Tensor<T>& x) {
  const Tensor<T> s = nn::mean_last_axis(x);
  gates_ = sigmoid_.forward(fc2.forward(relu_.forward(fc1.forward(s))));
  x_ = x;
  const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2);
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T g = gates_[r];
    for (std::size_t t = 0; t < len; ++t) y[r * len + t] = x[r * len + t] * g;
  }
  return y;
}

template <typename T>
Tensor<T> SeBlock<T>::backward(const Tensor<T>& g_out) {
  if (x_.empty()) throw StateError("SE block: backward called before forward");
  const std::size_t rows = x_.dim(0) * x_.dim(1), len = x_.dim(2);
  Tensor<T> g_gates(gates_.shape());
  Tensor<T> gx(x_.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0;
    for (std::size_t t = 0; t < len; ++t) {
      acc += static_cast<double>(g_out[r * len + t]) * x_[r * len + t];
      gx[r * len + t] = g_out[r * len + t] * gates_[r];
    }
    g_gates[r] = static_cast<T>(acc);
  }
  const Tensor<T> g_s = fc1.backward(relu_.backward(fc2.backward(sigmoid_.backward(g_gates))));
  gx += nn::mean_last_axis_backward(g_s, len);
  return gx;
}

template <typename T>
void SeBlock<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  fc1.collect(store, prefix + ".fc1");
  fc2.collect(store, prefix + ".fc2");
}

// ------------------------------------------------------------- SeRes2Block

template <typename T>
SeRes2Block<T>::SeRes2Block(std::size_t channels, std::size_t res2_scale, std::size_t se_channels,
                            std::size_t kernel, std::size_t dilation)
    : tdnn1(channels, channels, 1),
      res2net(channels, res2_scale, kernel, dilation),
      tdnn2(channels, channels, 1),
      se(channels, se_channels),
      channels_(channels) {}

template <typename T>
Tensor<T> SeRes2Block<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 3 || x.dim(1) != channels_)
    throw ShapeError("SE-Res2Block expects [N," + std::to_string(channels_) + ",L], got " +
                     x.shape().str());
  Tensor<T> h = se.forward(tdnn2.forward(res2net.forward(tdnn1.forward(x, mode), mode), mode));
  h += x;
  return h;
}

template <typename T>
Tensor<T> SeRes2Block<T>::backward(const Tensor<T>& g_out) {
  Tensor<T> g = tdnn1.backward(res2net.backward(tdnn2.backward(se.backward(g_out))));
  g += g_out;
  return g;
}

template <typename T>
void SeRes2Block<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  tdnn1.collect(store, prefix + ".tdnn1");
  res2net.collect(store, prefix + ".res2net");
  tdnn2.collect(store, prefix + ".tdnn2");
  se.collect(store, prefix + ".se");
}

template <typename T>
std::uint64_t SeRes2Block<T>::macs(std::size_t length) const {
  return tdnn1.macs(length) + res2net.macs(length) + tdnn2.macs(length) + se.macs();
}

// ------------------------------------------------------ AttentiveStatsPool

template <typename T>
AttentiveStatsPool<T>::AttentiveStatsPool(std::size_t channels, std::size_t attention_channels)
    : attention(3 * channels, attention_channels, 1),
      score(attention_channels, channels, 1),
      channels_(channels) {}

template <typename T>
Tensor<T> AttentiveStatsPool<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 3 || x.dim(1) != channels_)
    throw ShapeError("ASP expects [N," + std::to_string(channels_) + ",L], got " +
                     x.shape().str());
  const std::size_t n_batch = x.dim(0), c = channels_, len = x.dim(2);
  if (len < 2) throw InputError("attentive statistics pooling needs at least 2 frames");
  const std::size_t rows = n_batch * c;

  // Global context: plain mean and std over time, broadcast back to frames.
  mean_u_.assign(rows, 0.0);
  var_u_.assign(rows, 0.0);
  Tensor<T> context({n_batch, 3 * c, len});
  for (std::size_t b = 0; b < n_batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t r = b * c + ch;
      const T* p = x.data() + r * len;
      double s = 0;
      for (std::size_t t = 0; t < len; ++t) s += p[t];
      const double mu = s / static_cast<double>(len);
      double ss = 0;
      for (std::size_t t = 0; t < len; ++t) ss += (p[t] - mu) * (p[t] - mu);
      mean_u_[r] = mu;
      var_u_[r] = ss / static_cast<double>(len);
      const T sd = static_cast<T>(std::sqrt(std::max(var_u_[r], kVarFloor)));
      T* d0 = context.data() + (b * 3 * c + ch) * len;
      T* d1 = context.data() + (b * 3 * c + c + ch) * len;
      T* d2 = context.data() + (b * 3 * c + 2 * c + ch) * len;
      for (std::size_t t = 0; t < len; ++t) {
        d0[t] = p[t];
        d1[t] = static_cast<T>(mu);
        d2[t] = sd;
      }
    }

  const Tensor<T> e = score.forward(tanh_.forward(attention.forward(context, mode)));
  alpha_ = nn::softmax(e, 2);

  mean_w_.assign(rows, 0.0);
  var_w_.assign(rows, 0.0);
  Tensor<T> out({n_batch, 2 * c});
  for (std::size_t b = 0; b < n_batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t r = b * c + ch;
      const T* p = x.data() + r * len;
      const T* a = alpha_.data() + r * len;
      double mu = 0;
      for (std::size_t t = 0; t < len; ++t) mu += static_cast<double>(a[t]) * p[t];
      double var = 0;
      for (std::size_t t = 0; t < len; ++t) var += a[t] * (p[t] - mu) * (p[t] - mu);
      mean_w_[r] = mu;
      var_w_[r] = var;
      out.at(b, ch) = static_cast<T>(mu);
      out.at(b, c + ch) = static_cast<T>(std::sqrt(std::max(var, kVarFloor)));
    }
  x_ = x;
  return out;
}

template <typename T>
Tensor<T> AttentiveStatsPool<T>::backward(const Tensor<T>& g_out) {
  if (x_.empty()) throw StateError("ASP: backward called before forward");
  const std::size_t n_batch = x_.dim(0), c = channels_, len = x_.dim(2);
  Tensor<T> gx(x_.shape());
  Tensor<T> g_alpha(x_.shape());
  for (std::size_t b = 0; b < n_batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t r = b * c + ch;
      const double g_mean = g_out.at(b, ch);
      const double g_var = var_w_[r] > kVarFloor
                               ? g_out.at(b, c + ch) / (2.0 * std::sqrt(var_w_[r]))
                               : 0.0;
      const double mu = mean_w_[r];
      const T* p = x_.data() + r * len;
      const T* a = alpha_.data() + r * len;
      for (std::size_t t = 0; t < len; ++t) {
        const double d = p[t] - mu;
        g_alpha[r * len + t] = static_cast<T>(g_mean * p[t] + g_var * d * d);
        gx[r * len + t] = static_cast<T>(a[t] * (g_mean + 2.0 * g_var * d));
      }
    }
  const Tensor<T> g_e = nn::softmax_backward(alpha_, g_alpha, 2);
  const Tensor<T> g_ctx = attention.backward(tanh_.backward(score.backward(g_e)));

  const double inv_len = 1.0 / static_cast<double>(len);
  for (std::size_t b = 0; b < n_batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t r = b * c + ch;
      const T* g0 = g_ctx.data() + (b * 3 * c + ch) * len;
      const T* g1 = g_ctx.data() + (b * 3 * c + c + ch) * len;
      const T* g2 = g_ctx.data() + (b * 3 * c + 2 * c + ch) * len;
      double g_mu = 0, g_sd = 0;
      for (std::size_t t = 0; t < len; ++t) {
        g_mu += g1[t];
        g_sd += g2[t];
      }
      const double g_var =
          var_u_[r] > kVarFloor ? g_sd / (2.0 * std::sqrt(var_u_[r])) : 0.0;
      const T* p = x_.data() + r * len;
      for (std::size_t t = 0; t < len; ++t) {
        gx[r * len + t] += static_cast<T>(
            g0[t] + g_mu * inv_len + g_var * 2.0 * (p[t] - mean_u_[r]) * inv_len);
      }
    }
  return gx;
}

template <typename T>
void AttentiveStatsPool<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  attention.collect(store, prefix + ".attention");
  score.collect(store, prefix + ".score");
}

template <typename T>
std::uint64_t AttentiveStatsPool<T>::macs(std::size_t length) const {
  return attention.macs(length) + score.macs(length);
}

// ----------------------------------------------------------- EcapaBackbone

void BackboneConfig::validate() const {
  if (channels == 0 || channels % res2_scale != 0)
    throw ConfigError("backbone channels " + std::to_string(channels) +
                      " must be a positive multiple of the Res2Net scale " +
                      std::to_string(res2_scale));
  if (kernel % 2 == 0) throw ConfigError("backbone kernel must be odd");
  if (se_channels == 0 || attention_channels == 0 || embed_dim == 0)
    throw ConfigError("backbone widths must be positive");
}

template <typename T>
EcapaBackbone<T>::EcapaBackbone(const BackboneConfig& cfg)
    : aggregate(cfg.aggregate_channels(), cfg.aggregate_channels(), 1),
      pool(cfg.aggregate_channels(), cfg.attention_channels),
      pool_bn(2 * cfg.aggregate_channels()),
      embed(2 * cfg.aggregate_channels(), cfg.embed_dim),
      cfg_(cfg) {
  cfg.validate();
  for (std::size_t d : cfg.dilations)
    blocks.emplace_back(cfg.channels, cfg.res2_scale, cfg.se_channels, cfg.kernel, d);
}

template <typename T>
Tensor<T> EcapaBackbone<T>::forward(const Tensor<T>& x, Mode mode) {
  std::vector<Tensor<T>> outs;
  outs.reserve(blocks.size());
  const Tensor<T>* in = &x;
  for (auto& b : blocks) {
    outs.push_back(b.forward(*in, mode));
    in = &outs.back();
  }
  const Tensor<T> h = aggregate.forward(nn::concat_channels<T>(outs), mode);
  return embed.forward(pool_bn.forward(pool.forward(h, mode), mode));
}

template <typename T>
Tensor<T> EcapaBackbone<T>::backward(const Tensor<T>& g_out) {
  const Tensor<T> g_cat =
      aggregate.backward(pool.backward(pool_bn.backward(embed.backward(g_out))));
  const std::size_t c = cfg_.channels;
  Tensor<T> g;
  for (std::size_t i = blocks.size(); i-- > 0;) {
    Tensor<T> gi = nn::slice_channels(g_cat, i * c, c);
    if (!g.empty()) gi += g;
    g = blocks[i].backward(gi);
  }
  return g;
}

template <typename T>
void EcapaBackbone<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(store, prefix + ".block" + std::to_string(i + 1));
  aggregate.collect(store, prefix + ".aggregate");
  pool.collect(store, prefix + ".pool");
  pool_bn.collect(store, prefix + ".pool_bn");
  embed.collect(store, prefix + ".embed");
}

template <typename T>
void EcapaBackbone<T>::trace_macs(nn::MacTrace& trace, const std::string& prefix,
                                  std::size_t length) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    trace.push_back({prefix + ".block" + std::to_string(i + 1), blocks[i].macs(length)});
  trace.push_back({prefix + ".aggregate", aggregate.macs(length)});
  trace.push_back({prefix + ".pool", pool.macs(length)});
  trace.push_back({prefix + ".embed", embed.macs()});
}

template class Res2NetBlock<float>;
template class Res2NetBlock<double>;
template class SeBlock<float>;
template class SeBlock<double>;
template class SeRes2Block<float>;
template class SeRes2Block<double>;
template class AttentiveStatsPool<float>;
template class AttentiveStatsPool<double>;
template class EcapaBackbone<float>;
template class EcapaBackbone<double>;

}  // namespace mfatdnn::backbone
