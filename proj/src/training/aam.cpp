#include "mfatdnn/training/aam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfatdnn/error.hpp"

namespace mfatdnn::training {

void AamConfig::validate() const {
  if (classes < 2) throw ConfigError("AAM-softmax needs at least 2 classes");
  if (!(scale > 0)) throw ConfigError("AAM scale must be positive");
  if (!(margin >= 0 && margin < std::numbers::pi / 2)) throw ConfigError("AAM margin must lie in [0, pi/2)");
}

namespace {

// Unit-normalize `n` rows of length e; returns the norms.
std::vector<double> normalize_rows(const double* src, std::size_t n, std::size_t e, std::vector<double>& out,
                                   const char* what) {
  out.resize(n * e);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t k = 0; k < e; ++k) ss += src[i * e + k] * src[i * e + k];
    norms[i] = std::sqrt(ss);
    if (!(norms[i] > 1e-12)) throw NumericError(std::string("zero-norm ") + what + " row " + std::to_string(i));
    for (std::size_t k = 0; k < e; ++k) out[i * e + k] = src[i * e + k] / norms[i];
  }
  return norms;
}

// Backward through u = v / |v|: dv = (g - u (u.g)) / |v|.
void normalize_backward(const double* u, const double* g, double norm, std::size_t e, double* dv) {
  double dot = 0.0;
  for (std::size_t k = 0; k < e; ++k) dot += u[k] * g[k];
  for (std::size_t k = 0; k < e; ++k) dv[k] = (g[k] - u[k] * dot) / norm;
}

}  // namespace

template <typename T>
double aam_softmax_batch(const nn::Tensor<T>& emb, const nn::Tensor<T>& weight,
                         std::span<const std::size_t> labels, const AamConfig& cfg,
                         nn::Tensor<T>* grad_emb, nn::Tensor<T>* grad_weight) {
  cfg.validate();
  if (emb.shape().rank() != 2 || weight.shape().rank() != 2 || emb.dim(1) != weight.dim(1))
    throw ShapeError("AAM-softmax expects emb [N,E] and weight [K,E], got " + emb.shape().str() + " and " +
                     weight.shape().str());
  const std::size_t n = emb.dim(0), e = emb.dim(1), kc = weight.dim(0);
  if (kc != cfg.classes)
    throw ShapeError("AAM weight has " + std::to_string(kc) + " rows for " + std::to_string(cfg.classes) + " classes");
  if (labels.size() != n) throw ShapeError("AAM-softmax: one label per embedding required");
  for (std::size_t lab : labels)
    if (lab >= kc) throw InputError("label " + std::to_string(lab) + " out of range for " + std::to_string(kc) + " classes");

  std::vector<double> ev(emb.vec().begin(), emb.vec().end()), wv(weight.vec().begin(), weight.vec().end());
  std::vector<double> eu, wu;
  const auto en = normalize_rows(ev.data(), n, e, eu, "embedding");
  const auto wn = normalize_rows(wv.data(), kc, e, wu, "classifier");

  const double s = cfg.scale, m = cfg.margin;
  const double cos_m = std::cos(m), sin_m = std::sin(m);
  std::vector<double> g_eu(n * e, 0.0), g_wu(kc * e, 0.0), cosv(kc), logit(kc);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* u = &eu[i * e];
    for (std::size_t j = 0; j < kc; ++j) {
      double c = 0.0;
      for (std::size_t k = 0; k < e; ++k) c += wu[j * e + k] * u[k];
      cosv[j] = std::clamp(c, -1.0, 1.0);
      logit[j] = s * cosv[j];
    }
    const std::size_t y = labels[i];
    const double cy = cosv[y];
    const double theta = std::acos(cy);
    double dlogit_dc = 0.0;
    if (theta + m < std::numbers::pi) {
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cy * cy));
      logit[y] = s * (cy * cos_m - sin_t * sin_m);
      // d/dc cos(acos(c) + m); finite as c -> 1 by bounding sin(theta).
      dlogit_dc = s * (cos_m + sin_m * cy / std::max(sin_t, 1e-6));
    } else {
      logit[y] = -s;
    }
    const double mx = *std::max_element(logit.begin(), logit.end());
    double z = 0.0;
    for (double l : logit) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    total += lse - logit[y];

    for (std::size_t j = 0; j < kc; ++j) {
      const double p = std::exp(logit[j] - lse);
      const double gl = (p - (j == y ? 1.0 : 0.0)) / static_cast<double>(n);
      const double gc = j == y ? gl * dlogit_dc : gl * s;
      for (std::size_t k = 0; k < e; ++k) {
        g_eu[i * e + k] += gc * wu[j * e + k];
        g_wu[j * e + k] += gc * u[k];
      }
    }
  }

  if (grad_emb) {
    *grad_emb = nn::Tensor<T>(emb.shape());
    std::vector<double> dv(e);
    for (std::size_t i = 0; i < n; ++i) {
      normalize_backward(&eu[i * e], &g_eu[i * e], en[i], e, dv.data());
      for (std::size_t k = 0; k < e; ++k) grad_emb->at(i, k) = static_cast<T>(dv[k]);
    }
  }
  if (grad_weight) {
    if (grad_weight->shape() != weight.shape()) *grad_weight = nn::Tensor<T>(weight.shape());
    std::vector<double> dv(e);
    for (std::size_t j = 0; j < kc; ++j) {
      normalize_backward(&wu[j * e], &g_wu[j * e], wn[j], e, dv.data());
      for (std::size_t k = 0; k < e; ++k) grad_weight->at(j, k) += static_cast<T>(dv[k]);
    }
  }
  return total / static_cast<double>(n);
}

AamLoss aam_softmax_loss(std::span<const double> emb, const nn::Tensor<double>& weight, std::size_t label,
                         const AamConfig& cfg) {
  const nn::Tensor<double> x({1, emb.size()}, std::vector<double>(emb.begin(), emb.end()));
  const std::size_t labels[1] = {label};
  AamLoss out;
  nn::Tensor<double> ge;
  out.grad_weight = nn::Tensor<double>(weight.shape());
  out.loss = aam_softmax_batch<double>(x, weight, labels, cfg, &ge, &out.grad_weight);
  out.grad_emb = ge.vec();
  return out;
}

template <typename T>
AamSoftmax<T>::AamSoftmax(std::size_t embed_dim, const AamConfig& cfg)
    : weight(nn::Shape{cfg.classes, embed_dim}, nn::Init::kFanInUniform, embed_dim), cfg_(cfg) {
  cfg_.validate();
}

template <typename T>
double AamSoftmax<T>::forward(const nn::Tensor<T>& emb, std::span<const std::size_t> labels) {
  grad_weight_ = nn::Tensor<T>(weight.value.shape());
  const double loss = aam_softmax_batch<T>(emb, weight.value, labels, cfg_, &grad_emb_, &grad_weight_);
  has_forward_ = true;
  return loss;
}

template <typename T>
nn::Tensor<T> AamSoftmax<T>::backward() {
  if (!has_forward_) throw StateError("AamSoftmax::backward called before forward");
  has_forward_ = false;
  if (!weight.frozen) weight.grad += grad_weight_;
  return std::move(grad_emb_);
}

template <typename T>
void AamSoftmax<T>::collect(nn::ParamStore<T>& store, const std::string& prefix) {
  store.add(prefix + ".weight", weight);
}

template double aam_softmax_batch<float>(const nn::Tensor<float>&, const nn::Tensor<float>&,
                                         std::span<const std::size_t>, const AamConfig&, nn::Tensor<float>*,
                                         nn::Tensor<float>*);
template double aam_softmax_batch<double>(const nn::Tensor<double>&, const nn::Tensor<double>&,
                                          std::span<const std::size_t>, const AamConfig&, nn::Tensor<double>*,
                                          nn::Tensor<double>*);
template class AamSoftmax<float>;
template class AamSoftmax<double>;

}  // namespace mfatdnn::training
