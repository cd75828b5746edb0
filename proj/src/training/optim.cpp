#include "mfatdnn/training/optim.hpp"

#include <cmath>

#include "mfatdnn/error.hpp"

namespace mfatdnn::training {

void CyclicLrSchedule::validate() const {
  if (cycle_steps == 0) throw ConfigError("cycle length must be positive");
  if (!(lr_min >= 0 && lr_max >= lr_min)) throw ConfigError("need 0 <= lr_min <= lr_max");
}

double cyclical_lr(std::uint64_t step, const CyclicLrSchedule& s) {
  s.validate();
  const double half = static_cast<double>(s.cycle_steps) / 2.0;
  const double pos = static_cast<double>(step % s.cycle_steps);
  const double f = pos <= half ? pos / half : (static_cast<double>(s.cycle_steps) - pos) / half;
  // Convex combination so f = 0 and f = 1 give the bounds exactly.
  return s.lr_min * (1.0 - f) + s.lr_max * f;
}

template <typename T>
Adam<T>::Adam(const nn::ParamStore<T>& store, const AdamConfig& cfg) : store_(&store), cfg_(cfg) {
  if (!(cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1 && cfg.eps > 0 && cfg.weight_decay >= 0))
    throw ConfigError("invalid Adam hyper-parameters");
  for (const auto& e : store) {
    m_.emplace_back(e.param->value.shape());
    v_.emplace_back(e.param->value.shape());
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  if (store_->size() != m_.size()) throw StateError("parameter store changed since the optimizer was built");
  for (const auto& e : *store_) {
    if (!e.param->trainable()) continue;
    for (T g : e.param->grad.vec())
      if (!std::isfinite(static_cast<double>(g)))
        throw NumericError("non-finite gradient in parameter '" + e.name + "' at optimizer step " +
                           std::to_string(t_ + 1));
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const T decay = static_cast<T>(1.0 - lr * cfg_.weight_decay);
  std::size_t i = 0;
  for (const auto& e : *store_) {
    nn::Param<T>& p = *e.param;
    auto& m = m_[i].vec();
    auto& v = v_[i].vec();
    ++i;
    if (!p.trainable()) continue;
    auto& w = p.value.vec();
    const auto& g = p.grad.vec();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = static_cast<T>(b1 * m[k] + (1.0 - b1) * g[k]);
      v[k] = static_cast<T>(b2 * v[k] + (1.0 - b2) * g[k] * g[k]);
      const double mhat = m[k] / c1, vhat = v[k] / c2;
      w[k] = static_cast<T>(w[k] - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      w[k] *= decay;
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace mfatdnn::training
