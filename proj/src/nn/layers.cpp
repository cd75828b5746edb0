#include "mfatdnn/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace mfatdnn::nn {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

void require_cached(bool cached, const char* layer) {
  if (!cached) throw StateError(std::string(layer) + ": backward called before forward");
}

// y[t] += w * x[t + off] over the valid range of t.
template <typename T>
inline void shifted_axpy(T* y, const T* x, T w, std::ptrdiff_t off, std::size_t len_y,
                         std::size_t len_x) {
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
  const std::ptrdiff_t hi =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(len_y),
                               static_cast<std::ptrdiff_t>(len_x) - off);
  const T* xs = x + off;
  for (std::ptrdiff_t t = lo; t < hi; ++t) y[t] += w * xs[t];
}

// Σ_t a[t] * b[t + off] over the valid range.
template <typename T>
inline double shifted_dot(const T* a, const T* b, std::ptrdiff_t off, std::size_t len_a,
                          std::size_t len_b) {
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
  const std::ptrdiff_t hi =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(len_a),
                               static_cast<std::ptrdiff_t>(len_b) - off);
  const T* bs = b + off;
  // Fixed lane split keeps the reduction vectorizable and its order
  // deterministic.
  constexpr std::ptrdiff_t kLanes = 16;
  T lanes[kLanes] = {};
  std::ptrdiff_t t = lo;
  for (; t + kLanes <= hi; t += kLanes)
    for (std::ptrdiff_t l = 0; l < kLanes; ++l) lanes[l] += a[t + l] * bs[t + l];
  double acc = 0;
  for (; t < hi; ++t) acc += static_cast<double>(a[t]) * bs[t];
  for (std::ptrdiff_t l = 0; l < kLanes; ++l) acc += lanes[l];
  return acc;
}

}  // namespace

// ---------------------------------------------------------------- LayerSpec

LayerSpec LayerSpec::conv1d(std::size_t in, std::size_t out, std::size_t kernel,
                            std::size_t dilation, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::kConv1d;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_t = kernel;
  s.dilation = dilation;
  s.has_bias = bias;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in, std::size_t out, std::size_t kernel,
                            std::size_t stride_f, std::size_t stride_t, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_f = kernel;
  s.kernel_t = kernel;
  s.stride_f = stride_f;
  s.stride_t = stride_t;
  s.has_bias = bias;
  return s;
}

void LayerSpec::validate() const {
  if (in_channels == 0 || out_channels == 0) throw ConfigError("layer with zero channels");
  if (dilation < 1 || stride_f < 1 || stride_t < 1)
    throw ConfigError("dilation and stride must be >= 1");
  if (kernel_t % 2 == 0 || kernel_f % 2 == 0)
    throw ConfigError("same-padding convolution needs an odd kernel, got " +
                      std::to_string(kind == LayerKind::kConv2d ? kernel_f : kernel_t));
}

// ------------------------------------------------------------------- Conv1d

template <typename T>
Conv1d<T>::Conv1d(const LayerSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::size_t fan_in = spec.in_channels * spec.kernel_t;
  weight = Param<T>({spec.out_channels, spec.in_channels, spec.kernel_t}, Init::kFanInUniform,
                    fan_in);
  if (spec.has_bias) bias = Param<T>({spec.out_channels}, Init::kFanInUniform, fan_in);
}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& x) {
  require(x.rank() == 3, "conv1d expects [N,C,L], got " + x.shape().str());
  require(x.dim(1) == spec_.in_channels,
          "conv1d channel mismatch: input " + std::to_string(x.dim(1)) + ", layer " +
              std::to_string(spec_.in_channels));
  const std::size_t n_batch = x.dim(0), cin = spec_.in_channels, cout = spec_.out_channels,
                    len = x.dim(2), k = spec_.kernel_t, dil = spec_.dilation;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) * dil / 2);
  Tensor<T> y({n_batch, cout, len});
  const T* w = weight.value.data();
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* xn = x.data() + n * cin * len;
    for (std::size_t co = 0; co < cout; ++co) {
      T* yrow = y.data() + (n * cout + co) * len;
      if (spec_.has_bias) std::fill(yrow, yrow + len, bias.value[co]);
      const T* wco = w + co * cin * k;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* xrow = xn + ci * len;
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j * dil) - pad;
          shifted_axpy(yrow, xrow, wco[ci * k + j], off, len, len);
        }
      }
    }
  }
  x_ = x;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Conv1d<T>::backward(const Tensor<T>& gy) {
  require_cached(cached_, "conv1d");
  const std::size_t n_batch = x_.dim(0), cin = spec_.in_channels, cout = spec_.out_channels,
                    len = x_.dim(2), k = spec_.kernel_t, dil = spec_.dilation;
  require(gy.shape() == Shape({n_batch, cout, len}), "conv1d backward: bad grad shape");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) * dil / 2);
  Tensor<T> gx(x_.shape());
  const T* w = weight.value.data();
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* gyn = gy.data() + n * cout * len;
    T* gxn = gx.data() + n * cin * len;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      T* gxrow = gxn + ci * len;
      for (std::size_t co = 0; co < cout; ++co) {
        const T* gyrow = gyn + co * len;
        for (std::size_t j = 0; j < k; ++j) {
          // gx[t + off] += w * gy[t]  <=>  gx[u] += w * gy[u - off]
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j * dil) - pad;
          shifted_axpy(gxrow, gyrow, w[(co * cin + ci) * k + j], -off, len, len);
        }
      }
    }
  }
  if (!weight.frozen) {
    T* gw = weight.grad.data();
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j * dil) - pad;
          double acc = 0;
          for (std::size_t n = 0; n < n_batch; ++n)
            acc += shifted_dot(gy.data() + (n * cout + co) * len, x_.data() + (n * cin + ci) * len,
                               off, len, len);
          gw[(co * cin + ci) * k + j] += static_cast<T>(acc);
        }
  }
  if (spec_.has_bias && !bias.frozen) {
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = 0;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const T* row = gy.data() + (n * cout + co) * len;
        for (std::size_t t = 0; t < len; ++t) acc += row[t];
      }
      bias.grad[co] += static_cast<T>(acc);
    }
  }
  return gx;
}

template <typename T>
void Conv1d<T>::collect(ParamStore<T>& store, const std::string& prefix) {
  store.add(prefix + ".weight", weight);
  if (spec_.has_bias) store.add(prefix + ".bias", bias);
}

template <typename T>
std::uint64_t Conv1d<T>::macs(std::size_t length) const {
  return static_cast<std::uint64_t>(spec_.kernel_t) * spec_.in_channels * spec_.out_channels *
         length;
}

// ------------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const LayerSpec& spec) : spec_(spec) {
  spec_.kind = LayerKind::kConv2d;
  spec_.validate();
  const std::size_t fan_in = spec.in_channels * spec.kernel_f * spec.kernel_t;
  weight = Param<T>({spec.out_channels, spec.in_channels, spec.kernel_f, spec.kernel_t},
                    Init::kFanInUniform, fan_in);
  if (spec.has_bias) bias = Param<T>({spec.out_channels}, Init::kFanInUniform, fan_in);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  require(x.rank() == 4, "conv2d expects [N,C,D,L], got " + x.shape().str());
  require(x.dim(1) == spec_.in_channels,
          "conv2d channel mismatch: input " + std::to_string(x.dim(1)) + ", layer " +
              std::to_string(spec_.in_channels));
  const std::size_t n_batch = x.dim(0), cin = spec_.in_channels, cout = spec_.out_channels;
  const std::size_t fin = x.dim(2), lin = x.dim(3);
  const std::size_t fout = out_freq(fin), lout = out_length(lin);
  const std::size_t kf = spec_.kernel_f, kt = spec_.kernel_t, sf = spec_.stride_f,
                    st = spec_.stride_t;
  const std::ptrdiff_t pf = static_cast<std::ptrdiff_t>(kf / 2),
                       pt = static_cast<std::ptrdiff_t>(kt / 2);
  Tensor<T> y({n_batch, cout, fout, lout});
  const T* w = weight.value.data();
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      T* yplane = y.data() + (n * cout + co) * fout * lout;
      if (spec_.has_bias) std::fill(yplane, yplane + fout * lout, bias.value[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* xplane = x.data() + (n * cin + ci) * fin * lin;
        for (std::size_t a = 0; a < kf; ++a) {
          for (std::size_t fo = 0; fo < fout; ++fo) {
            const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(fo * sf + a) - pf;
            if (fi < 0 || fi >= static_cast<std::ptrdiff_t>(fin)) continue;
            const T* xrow = xplane + fi * lin;
            T* yrow = yplane + fo * lout;
            for (std::size_t b = 0; b < kt; ++b) {
              const T wv = w[((co * cin + ci) * kf + a) * kt + b];
              const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(b) - pt;
              if (st == 1) {
                shifted_axpy(yrow, xrow, wv, off, lout, lin);
              } else {
                for (std::size_t to = 0; to < lout; ++to) {
                  const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * st) + off;
                  if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(lin)) yrow[to] += wv * xrow[ti];
                }
              }
            }
          }
        }
      }
    }
  }
  x_ = x;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& gy) {
  require_cached(cached_, "conv2d");
  const std::size_t n_batch = x_.dim(0), cin = spec_.in_channels, cout = spec_.out_channels;
  const std::size_t fin = x_.dim(2), lin = x_.dim(3);
  const std::size_t fout = out_freq(fin), lout = out_length(lin);
  require(gy.shape() == Shape({n_batch, cout, fout, lout}), "conv2d backward: bad grad shape");
  const std::size_t kf = spec_.kernel_f, kt = spec_.kernel_t, sf = spec_.stride_f,
                    st = spec_.stride_t;
  const std::ptrdiff_t pf = static_cast<std::ptrdiff_t>(kf / 2),
                       pt = static_cast<std::ptrdiff_t>(kt / 2);
  Tensor<T> gx(x_.shape());
  const T* w = weight.value.data();
  T* gw = weight.frozen ? nullptr : weight.grad.data();
  std::vector<double> gw_acc(gw ? weight.value.numel() : 0, 0.0);
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* xplane = x_.data() + (n * cin + ci) * fin * lin;
      T* gxplane = gx.data() + (n * cin + ci) * fin * lin;
      for (std::size_t co = 0; co < cout; ++co) {
        const T* gyplane = gy.data() + (n * cout + co) * fout * lout;
        for (std::size_t a = 0; a < kf; ++a) {
          for (std::size_t fo = 0; fo < fout; ++fo) {
            const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(fo * sf + a) - pf;
            if (fi < 0 || fi >= static_cast<std::ptrdiff_t>(fin)) continue;
            const T* gyrow = gyplane + fo * lout;
            const T* xrow = xplane + fi * lin;
            T* gxrow = gxplane + fi * lin;
            for (std::size_t b = 0; b < kt; ++b) {
              const std::size_t widx = ((co * cin + ci) * kf + a) * kt + b;
              const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(b) - pt;
              if (st == 1) {
                shifted_axpy(gxrow, gyrow, w[widx], -off, lin, lout);
                if (gw) gw_acc[widx] += shifted_dot(gyrow, xrow, off, lout, lin);
              } else {
                double acc = 0;
                for (std::size_t to = 0; to < lout; ++to) {
                  const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * st) + off;
                  if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(lin)) continue;
                  gxrow[ti] += w[widx] * gyrow[to];
                  acc += static_cast<double>(gyrow[to]) * xrow[ti];
                }
                if (gw) gw_acc[widx] += acc;
              }
            }
          }
        }
      }
    }
  }
  if (gw)
    for (std::size_t i = 0; i < gw_acc.size(); ++i) gw[i] += static_cast<T>(gw_acc[i]);
  if (spec_.has_bias && !bias.frozen) {
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = 0;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const T* plane = gy.data() + (n * cout + co) * fout * lout;
        for (std::size_t i = 0; i < fout * lout; ++i) acc += plane[i];
      }
      bias.grad[co] += static_cast<T>(acc);
    }
  }
  return gx;
}

template <typename T>
void Conv2d<T>::collect(ParamStore<T>& store, const std::string& prefix) {
  store.add(prefix + ".weight", weight);
  if (spec_.has_bias) store.add(prefix + ".bias", bias);
}

template <typename T>
std::uint64_t Conv2d<T>::macs(std::size_t freq, std::size_t length) const {
  return static_cast<std::uint64_t>(spec_.kernel_f) * spec_.kernel_t * spec_.in_channels *
         spec_.out_channels * out_freq(freq) * out_length(length);
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels) : channels_(channels) {
  gamma = Param<T>({channels}, Init::kOnes);
  beta = Param<T>({channels}, Init::kZeros);
  running_mean = Param<T>({channels}, Init::kZeros, 1, /*buffer=*/true);
  running_var = Param<T>({channels}, Init::kOnes, 1, /*buffer=*/true);
  running_var.value.fill(T(1));
  gamma.value.fill(T(1));
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
  require(x.rank() >= 2 && x.dim(1) == channels_,
          "batchnorm expects channel axis " + std::to_string(channels_) + ", got " +
              x.shape().str());
  const std::size_t n_batch = x.dim(0), c = channels_;
  const std::size_t inner = x.numel() / (n_batch * c);
  const std::size_t count = n_batch * inner;
  Tensor<T> y(x.shape());
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double s = 0;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const T* p = x.data() + (n * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      mean = s / static_cast<double>(count);
      double ss = 0;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const T* p = x.data() + (n * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = p[i] - mean;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(count);
      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      running_mean.value[ch] =
          static_cast<T>(kMomentum * running_mean.value[ch] + (1.0 - kMomentum) * mean);
      running_var.value[ch] =
          static_cast<T>(kMomentum * running_var.value[ch] + (1.0 - kMomentum) * unbiased);
    } else {
      mean = running_mean.value[ch];
      var = running_var.value[ch];
    }
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std_[ch] = inv;
    const T g = gamma.value[ch], b = beta.value[ch];
    for (std::size_t n = 0; n < n_batch; ++n) {
      const std::size_t base = (n * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T xh = static_cast<T>((x[base + i] - mean) * inv);
        xhat_[base + i] = xh;
        y[base + i] = g * xh + b;
      }
    }
  }
  mode_ = mode;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& gy) {
  require_cached(cached_, "batchnorm");
  xhat_.require_same_shape(gy, "batchnorm backward");
  const std::size_t n_batch = gy.dim(0), c = channels_;
  const std::size_t inner = gy.numel() / (n_batch * c);
  const double count = static_cast<double>(n_batch * inner);
  Tensor<T> gx(gy.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_g = 0, sum_gx = 0;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const std::size_t base = (n * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_g += gy[base + i];
        sum_gx += static_cast<double>(gy[base + i]) * xhat_[base + i];
      }
    }
    if (!gamma.frozen) gamma.grad[ch] += static_cast<T>(sum_gx);
    if (!beta.frozen) beta.grad[ch] += static_cast<T>(sum_g);
    const double scale = gamma.value[ch] * inv_std_[ch];
    for (std::size_t n = 0; n < n_batch; ++n) {
      const std::size_t base = (n * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        if (mode_ == Mode::kTrain) {
          gx[base + i] = static_cast<T>(
              scale * (gy[base + i] - sum_g / count - xhat_[base + i] * sum_gx / count));
        } else {
          gx[base + i] = static_cast<T>(scale * gy[base + i]);
        }
      }
    }
  }
  return gx;
}

template <typename T>
void BatchNorm<T>::collect(ParamStore<T>& store, const std::string& prefix) {
  store.add(prefix + ".gamma", gamma);
  store.add(prefix + ".beta", beta);
  store.add(prefix + ".running_mean", running_mean);
  store.add(prefix + ".running_var", running_var);
}

// ------------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, bool bias_flag)
    : in_(in), out_(out), has_bias_(bias_flag) {
  if (in == 0 || out == 0) throw ConfigError("linear layer with zero width");
  weight = Param<T>({out, in}, Init::kFanInUniform, in);
  if (bias_flag) bias = Param<T>({out}, Init::kFanInUniform, in);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  require(x.rank() == 2 && x.dim(1) == in_,
          "linear expects [N," + std::to_string(in_) + "], got " + x.shape().str());
  const std::size_t n_batch = x.dim(0);
  Tensor<T> y({n_batch, out_});
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* xr = x.data() + n * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      const T* wr = weight.value.data() + o * in_;
      T acc = has_bias_ ? bias.value[o] : T(0);
      for (std::size_t i = 0; i < in_; ++i) acc += wr[i] * xr[i];
      y.at(n, o) = acc;
    }
  }
  x_ = x;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& gy) {
  require_cached(cached_, "linear");
  const std::size_t n_batch = x_.dim(0);
  require(gy.shape() == Shape({n_batch, out_}), "linear backward: bad grad shape");
  Tensor<T> gx({n_batch, in_});
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* xr = x_.data() + n * in_;
    T* gxr = gx.data() + n * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      const T g = gy.at(n, o);
      const T* wr = weight.value.data() + o * in_;
      for (std::size_t i = 0; i < in_; ++i) gxr[i] += g * wr[i];
      if (!weight.frozen) {
        T* gwr = weight.grad.data() + o * in_;
        for (std::size_t i = 0; i < in_; ++i) gwr[i] += g * xr[i];
      }
      if (has_bias_ && !bias.frozen) bias.grad[o] += g;
    }
  }
  return gx;
}

template <typename T>
void Linear<T>::collect(ParamStore<T>& store, const std::string& prefix) {
  store.add(prefix + ".weight", weight);
  if (has_bias_) store.add(prefix + ".bias", bias);
}

// -------------------------------------------------------------- activations

template <typename T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  y_ = y;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& gy) {
  require_cached(cached_, "relu");
  y_.require_same_shape(gy, "relu backward");
  Tensor<T> gx(gy.shape());
  for (std::size_t i = 0; i < gy.numel(); ++i) gx[i] = y_[i] > T(0) ? gy[i] : T(0);
  return gx;
}

template <typename T>
Tensor<T> Sigmoid<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = sigmoid(x[i]);
  y_ = y;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Sigmoid<T>::backward(const Tensor<T>& gy) {
  require_cached(cached_, "sigmoid");
  y_.require_same_shape(gy, "sigmoid backward");
  Tensor<T> gx(gy.shape());
  for (std::size_t i = 0; i < gy.numel(); ++i) gx[i] = gy[i] * y_[i] * (T(1) - y_[i]);
  return gx;
}

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
  y_ = y;
  cached_ = true;
  return y;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& gy) {
  require_cached(cached_, "tanh");
  y_.require_same_shape(gy, "tanh backward");
  Tensor<T> gx(gy.shape());
  for (std::size_t i = 0; i < gy.numel(); ++i) gx[i] = gy[i] * (T(1) - y_[i] * y_[i]);
  return gx;
}

// ------------------------------------------------------------------ softmax

namespace {
struct AxisLayout {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisLayout layout_for(const Shape& s, std::size_t axis) {
  if (axis >= s.rank()) throw ConfigError("softmax axis out of range");
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= s[i];
  l.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.rank(); ++i) l.inner *= s[i];
  if (l.extent == 0) throw ConfigError("softmax over an empty axis");
  return l;
}
}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisLayout l = layout_for(x.shape(), axis);
  Tensor<T> y(x.shape());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      T mx = x[base];
      for (std::size_t k = 1; k < l.extent; ++k) mx = std::max(mx, x[base + k * l.inner]);
      double sum = 0;
      for (std::size_t k = 0; k < l.extent; ++k) {
        const T e = std::exp(x[base + k * l.inner] - mx);
        y[base + k * l.inner] = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (std::size_t k = 0; k < l.extent; ++k)
        y[base + k * l.inner] = static_cast<T>(y[base + k * l.inner] * inv);
    }
  return y;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& gy, std::size_t axis) {
  y.require_same_shape(gy, "softmax backward");
  const AxisLayout l = layout_for(y.shape(), axis);
  Tensor<T> gx(y.shape());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double dot = 0;
      for (std::size_t k = 0; k < l.extent; ++k)
        dot += static_cast<double>(y[base + k * l.inner]) * gy[base + k * l.inner];
      for (std::size_t k = 0; k < l.extent; ++k) {
        const std::size_t i = base + k * l.inner;
        gx[i] = static_cast<T>(y[i] * (gy[i] - dot));
      }
    }
  return gx;
}

// ---------------------------------------------------------- pooling / misc

template <typename T>
Tensor<T> mean_last_axis(const Tensor<T>& x) {
  require(x.rank() >= 2, "mean over time needs rank >= 2");
  const std::size_t len = x.dim(x.rank() - 1);
  if (len == 0) throw InputError("mean over an empty time axis");
  std::array<std::size_t, kMaxRank> dims{};
  for (std::size_t i = 0; i + 1 < x.rank(); ++i) dims[i] = x.dim(i);
  const Shape out = Shape::of(std::span<const std::size_t>(dims.data(), x.rank() - 1));
  Tensor<T> y(out);
  for (std::size_t r = 0; r < y.numel(); ++r) {
    const T* p = x.data() + r * len;
    double s = 0;
    for (std::size_t t = 0; t < len; ++t) s += p[t];
    y[r] = static_cast<T>(s / static_cast<double>(len));
  }
  return y;
}

template <typename T>
Tensor<T> mean_last_axis_backward(const Tensor<T>& gy, std::size_t length) {
  std::array<std::size_t, kMaxRank> dims{};
  for (std::size_t i = 0; i < gy.rank(); ++i) dims[i] = gy.dim(i);
  dims[gy.rank()] = length;
  Tensor<T> gx(Shape::of(std::span<const std::size_t>(dims.data(), gy.rank() + 1)));
  const T inv = T(1) / static_cast<T>(length);
  for (std::size_t r = 0; r < gy.numel(); ++r) {
    T* p = gx.data() + r * length;
    const T v = gy[r] * inv;
    for (std::size_t t = 0; t < length; ++t) p[t] = v;
  }
  return gx;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "concat of nothing");
  const Shape& s0 = parts[0].shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    require(p.rank() == s0.rank() && p.dim(0) == s0[0], "concat: incompatible parts");
    for (std::size_t i = 2; i < s0.rank(); ++i)
      require(p.dim(i) == s0[i], "concat: non-channel extents differ");
    channels += p.dim(1);
  }
  Shape out = s0;
  out[1] = channels;
  Tensor<T> y(out);
  const std::size_t inner = s0.numel() / (s0[0] * s0[1]);
  for (std::size_t n = 0; n < s0[0]; ++n) {
    std::size_t c0 = 0;
    for (const auto& p : parts) {
      const std::size_t block = p.dim(1) * inner;
      std::copy_n(p.data() + n * block, block, y.data() + (n * channels + c0) * inner);
      c0 += p.dim(1);
    }
  }
  return y;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require(x.rank() >= 2 && begin + count <= x.dim(1), "channel slice out of range");
  Shape out = x.shape();
  out[1] = count;
  Tensor<T> y(out);
  const std::size_t inner = x.numel() / (x.dim(0) * x.dim(1));
  for (std::size_t n = 0; n < x.dim(0); ++n)
    std::copy_n(x.data() + (n * x.dim(1) + begin) * inner, count * inner,
                y.data() + n * count * inner);
  return y;
}

template <typename T>
void add_slice_channels(Tensor<T>& dst, const Tensor<T>& src, std::size_t begin) {
  require(dst.rank() == src.rank() && begin + src.dim(1) <= dst.dim(1),
          "channel slice add out of range");
  const std::size_t inner = dst.numel() / (dst.dim(0) * dst.dim(1));
  const std::size_t count = src.dim(1);
  for (std::size_t n = 0; n < dst.dim(0); ++n) {
    T* d = dst.data() + (n * dst.dim(1) + begin) * inner;
    const T* s = src.data() + n * count * inner;
    for (std::size_t i = 0; i < count * inner; ++i) d[i] += s[i];
  }
}

#define MFATDNN_INSTANTIATE(T)                                                              \
  template class Conv1d<T>;                                                                 \
  template class Conv2d<T>;                                                                 \
  template class BatchNorm<T>;                                                              \
  template class Linear<T>;                                                                 \
  template class Relu<T>;                                                                   \
  template class Sigmoid<T>;                                                                \
  template class Tanh<T>;                                                                   \
  template T sigmoid<T>(T);                                                                 \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                             \
  template Tensor<T> softmax_backward<T>(const Tensor<T>&, const Tensor<T>&, std::size_t);  \
  template Tensor<T> mean_last_axis<T>(const Tensor<T>&);                                   \
  template Tensor<T> mean_last_axis_backward<T>(const Tensor<T>&, std::size_t);             \
  template Tensor<T> concat_channels<T>(std::span<const Tensor<T>>);                        \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);         \
  template void add_slice_channels<T>(Tensor<T>&, const Tensor<T>&, std::size_t);

MFATDNN_INSTANTIATE(float)
MFATDNN_INSTANTIATE(double)

}  // namespace mfatdnn::nn
