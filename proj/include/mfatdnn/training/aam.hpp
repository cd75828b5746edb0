#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mfatdnn/nn/param.hpp"

namespace mfatdnn::training {

struct AamConfig {
  double margin = 0.2;  // radians
  double scale = 30.0;
  std::size_t classes = 0;

  void validate() const;
};

// Mean AAM-softmax cross-entropy over a batch. emb is [N, E], weight [K, E];
// both are L2-normalized row-wise before the cosine logits. The target logit
// is scale * cos(min(theta_y + margin, pi)). Gradients (of the mean loss) are
// written to grad_emb / accumulated into grad_weight when non-null.
template <typename T>
double aam_softmax_batch(const nn::Tensor<T>& emb, const nn::Tensor<T>& weight,
                         std::span<const std::size_t> labels, const AamConfig& cfg,
                         nn::Tensor<T>* grad_emb, nn::Tensor<T>* grad_weight);

struct AamLoss {
  double loss = 0.0;
  std::vector<double> grad_emb;      // [E]
  nn::Tensor<double> grad_weight;    // [K, E]
};

// Single-embedding form.
AamLoss aam_softmax_loss(std::span<const double> emb, const nn::Tensor<double>& weight,
                         std::size_t label, const AamConfig& cfg);

// Classifier head owning the [K, E] weight matrix.
template <typename T>
class AamSoftmax {
 public:
  AamSoftmax() = default;
  AamSoftmax(std::size_t embed_dim, const AamConfig& cfg);

  double forward(const nn::Tensor<T>& emb, std::span<const std::size_t> labels);
  // Gradient of the last forward's mean loss w.r.t. emb; accumulates into
  // weight.grad.
  nn::Tensor<T> backward();
  void collect(nn::ParamStore<T>& store, const std::string& prefix);
  const AamConfig& config() const { return cfg_; }

  nn::Param<T> weight;

 private:
  AamConfig cfg_;
  nn::Tensor<T> grad_emb_, grad_weight_;
  bool has_forward_ = false;
};

}  // namespace mfatdnn::training
