#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mfatdnn/nn/param.hpp"
#include "mfatdnn/nn/tensor.hpp"
#include "mfatdnn/rng.hpp"

namespace mfatdnn::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error; gradients smaller than this are
  // compared in absolute terms.
  double floor = 1e-6;
  // Absolute differences at or below this pass outright. Zero by default; set
  // it when some gradients are exactly zero (e.g. a conv bias feeding
  // train-mode batchnorm) and finite differences only see round-off.
  double abs_tolerance = 0.0;
  // Coordinates sampled per tensor (0 = all).
  std::size_t max_coords = 24;
  // Coordinates whose one-sided differences disagree by more than the
  // observed error sit on a ReLU kink; at most this fraction may be skipped.
  double max_kink_fraction = 0.05;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t kinks = 0;
  bool passed = true;
};

// A tensor under test: its values (perturbed in place) and the analytic
// gradient already computed for them.
struct GradTarget {
  std::string name;
  std::vector<double>* values;
  std::vector<double> analytic;
};

// Central finite differences against analytic gradients. `loss` must
// recompute the scalar objective from the current contents of every target.
inline GradCheckResult check_gradients(const std::function<double()>& loss,
                                       std::vector<GradTarget>& targets, Rng rng,
                                       const GradCheckOptions& opt = {}) {
  GradCheckResult res;
  const double f0 = loss();
  for (auto& tgt : targets) {
    std::vector<double>& v = *tgt.values;
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (opt.max_coords && idx.size() > opt.max_coords) {
      for (std::size_t i = 0; i < opt.max_coords; ++i)
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      idx.resize(opt.max_coords);
    }
    for (std::size_t i : idx) {
      const double saved = v[i];
      v[i] = saved + opt.eps;
      const double fp = loss();
      v[i] = saved - opt.eps;
      const double fm = loss();
      v[i] = saved;
      const double numeric = (fp - fm) / (2 * opt.eps);
      const double a = tgt.analytic[i];
      const double err = std::abs(a - numeric);
      const double rel =
          err <= opt.abs_tolerance ? 0.0 : err / std::max({std::abs(a), std::abs(numeric), opt.floor});
      ++res.checked;
      if (rel > opt.tolerance) {
        const double one_sided_gap = std::abs((fp - f0) - (f0 - fm)) / opt.eps;
        if (one_sided_gap >= err) {
          ++res.kinks;
          continue;
        }
      }
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        char buf[96];
        std::snprintf(buf, sizeof buf, "] analytic=%.6e numeric=%.6e", a, numeric);
        res.worst = tgt.name + "[" + std::to_string(i) + buf;
      }
    }
  }
  res.passed = res.max_rel_error < opt.tolerance &&
               static_cast<double>(res.kinks) <=
                   opt.max_kink_fraction * static_cast<double>(std::max<std::size_t>(res.checked, 1));
  return res;
}

// Convenience: every trainable parameter of a double-precision store as a
// target, reading analytic gradients from Param::grad.
inline void append_param_targets(const ParamStore<double>& store, std::vector<GradTarget>& out) {
  for (const auto& e : store) {
    if (e.param->buffer || e.param->frozen) continue;
    out.push_back({e.name, &e.param->value.vec(), e.param->grad.vec()});
  }
}

// Gradient check of y = fwd(x) under the scalar loss sum(r * y) for a random
// projection r; covers the input (when check_input) and every trainable
// parameter in `store`. bwd must return dL/dx and accumulate parameter grads.
inline GradCheckResult check_module_gradients(const std::function<Tensor<double>(const Tensor<double>&)>& fwd,
                                              const std::function<Tensor<double>(const Tensor<double>&)>& bwd,
                                              const ParamStore<double>& store, Tensor<double>& x, Rng rng,
                                              bool check_input = true, const GradCheckOptions& opt = {}) {
  Rng rr = rng.split("proj");
  const Tensor<double> y = fwd(x);
  Tensor<double> r(y.shape());
  for (auto& v : r.vec()) v = rr.normal();
  const auto project = [&r](const Tensor<double>& out) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) s += out.vec()[i] * r.vec()[i];
    return s;
  };
  store.zero_grad();
  fwd(x);
  const Tensor<double> gx = bwd(r);
  std::vector<GradTarget> targets;
  if (check_input) targets.push_back({"input", &x.vec(), gx.vec()});
  append_param_targets(store, targets);
  return check_gradients([&] { return project(fwd(x)); }, targets, rng.split("coords"), opt);
}

}  // namespace mfatdnn::nn
