#include "mfatdnn/cli/gradcheck_suite.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>

#include "mfatdnn/backbone/ecapa.hpp"
#include "mfatdnn/backbone/model.hpp"
#include "mfatdnn/frontend/mfa.hpp"
#include "mfatdnn/nn/blocks.hpp"
#include "mfatdnn/nn/layers.hpp"
#include "mfatdnn/training/aam.hpp"

namespace mfatdnn::cli {

namespace {

using nn::Mode;
using nn::ParamStore;
using nn::Tensor;
using TensorFn = std::function<Tensor<double>(const Tensor<double>&)>;

Tensor<double> random_tensor(const nn::Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (auto& v : t.vec()) v = rng.normal();
  return t;
}

// Conv biases feeding train-mode batchnorm have an exactly zero gradient;
// finite differences only see round-off there.
nn::GradCheckOptions bn_options() {
  nn::GradCheckOptions opt;
  opt.abs_tolerance = 1e-8;
  return opt;
}

// Whole models run in eval mode: train-mode batchnorm over a tiny batch,
// stacked a dozen deep, amplifies round-off past any useful tolerance. Every
// module is checked in train mode on its own above.
nn::GradCheckOptions model_options() {
  nn::GradCheckOptions opt = bn_options();
  opt.eps = 1e-6;
  return opt;
}

class Suite {
 public:
  explicit Suite(std::vector<GradCheckEntry>& out) : out_(out) {}

  void module(const std::string& name, std::uint64_t seed, const TensorFn& fwd, const TensorFn& bwd,
              const ParamStore<double>& store, Tensor<double> x, Rng& rng, const nn::GradCheckOptions& opt = {}) {
    out_.push_back({name, seed, nn::check_module_gradients(fwd, bwd, store, x, rng.split(name), true, opt)});
  }

  template <typename Layer>
  void layer(const std::string& name, std::uint64_t seed, Layer& l, const nn::Shape& in, Rng& rng,
             Mode mode, const nn::GradCheckOptions& opt = {}) {
    ParamStore<double> s;
    l.collect(s, name);
    nn::init_params(s, rng.split(name + ".init"));
    module(
        name, seed, [&](const Tensor<double>& v) { return l.forward(v, mode); },
        [&](const Tensor<double>& g) { return l.backward(g); }, s, random_tensor(in, rng), rng, opt);
  }

  template <typename Layer>
  void stateless(const std::string& name, std::uint64_t seed, Layer& l, const nn::Shape& in, Rng& rng) {
    ParamStore<double> s;
    l.collect(s, name);
    nn::init_params(s, rng.split(name + ".init"));
    module(
        name, seed, [&](const Tensor<double>& v) { return l.forward(v); },
        [&](const Tensor<double>& g) { return l.backward(g); }, s, random_tensor(in, rng), rng);
  }

  void add(GradCheckEntry e) { out_.push_back(std::move(e)); }

 private:
  std::vector<GradCheckEntry>& out_;
};

struct NoParams {
  void collect(ParamStore<double>&, const std::string&) {}
};

template <typename Act>
struct Activation : NoParams {
  Act act;
  Tensor<double> forward(const Tensor<double>& x) { return act.forward(x); }
  Tensor<double> backward(const Tensor<double>& g) { return act.backward(g); }
};

backbone::ModelConfig tiny_model(backbone::ModelVariant v) {
  backbone::ModelConfig c = backbone::ModelConfig::for_variant(v);
  c.mel_bins = 16;
  c.backbone.channels = 16;
  c.backbone.res2_scale = 4;
  c.backbone.se_channels = 4;
  c.backbone.attention_channels = 4;
  c.backbone.embed_dim = 6;
  c.cnn.channels = 4;
  c.mfa.mel_bins = 16;
  c.mfa.channels = 8;
  c.mfa.reduction = 2;
  c.mfa.out_channels = 16;
  return c;
}

frontend::MfaConfig tiny_mfa(std::size_t scale) {
  frontend::MfaConfig c;
  c.channels = 8;
  c.scale = scale;
  c.mel_bins = 16;
  c.out_channels = 12;
  c.reduction = 2;
  return c;
}

void run_seed(Suite& suite, std::uint64_t seed, Rng rng) {
  {
    nn::Conv1d<double> l(3, 4, 3, 1 + seed % 3);
    suite.stateless("conv1d", seed, l, {2, 3, 8}, rng);
  }
  {
    nn::Conv2d<double> l(nn::LayerSpec::conv2d(2, 3, 3, 1 + seed % 2, 1));
    suite.stateless("conv2d", seed, l, {2, 2, 5, 6}, rng);
  }
  {
    nn::Linear<double> l(5, 4);
    suite.stateless("linear", seed, l, {3, 5}, rng);
  }
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    const std::string name = mode == Mode::kTrain ? "batchnorm-train" : "batchnorm-eval";
    nn::BatchNorm<double> l(3);
    ParamStore<double> s;
    l.collect(s, name);
    nn::init_params(s, rng.split(name + ".init"));
    for (auto& v : l.gamma.value.vec()) v = rng.uniform(0.5, 1.5);
    for (auto& v : l.beta.value.vec()) v = rng.normal();
    for (auto& v : l.running_var.value.vec()) v = rng.uniform(0.5, 2.0);
    suite.module(
        name, seed, [&](const Tensor<double>& v) { return l.forward(v, mode); },
        [&](const Tensor<double>& g) { return l.backward(g); }, s, random_tensor({2, 3, 5}, rng), rng);
  }
  {
    Activation<nn::Relu<double>> relu;
    Activation<nn::Sigmoid<double>> sig;
    Activation<nn::Tanh<double>> tanh;
    suite.stateless("relu", seed, relu, {2, 3, 4}, rng);
    suite.stateless("sigmoid", seed, sig, {2, 3, 4}, rng);
    suite.stateless("tanh", seed, tanh, {2, 3, 4}, rng);
  }
  {
    ParamStore<double> none;
    Tensor<double> y;
    suite.module(
        "softmax", seed, [&](const Tensor<double>& v) { return y = nn::softmax(v, 2); },
        [&](const Tensor<double>& g) { return nn::softmax_backward(y, g, std::size_t{2}); }, none,
        random_tensor({2, 3, 6}, rng), rng);
    suite.module(
        "time-mean", seed, [](const Tensor<double>& v) { return nn::mean_last_axis(v); },
        [](const Tensor<double>& g) { return nn::mean_last_axis_backward(g, std::size_t{6}); }, none,
        random_tensor({2, 3, 6}, rng), rng);
  }
  {
    nn::TdnnBlock<double> l(3, 4, 5, 2);
    suite.layer("tdnn-block", seed, l, {2, 3, 9}, rng, Mode::kTrain, bn_options());
  }
  {
    nn::ConvBnRelu2d<double> l(nn::LayerSpec::conv2d(2, 3, 3, 1 + seed % 2, 1));
    suite.layer("conv-bn-relu-2d", seed, l, {2, 2, 6, 5}, rng, Mode::kTrain, bn_options());
  }
  {
    frontend::FaBlock<double> l(12, 3);
    suite.stateless("fa-block", seed, l, {2, 3, 4, 5}, rng);
  }
  {
    frontend::MfaFrontend<double> l(tiny_mfa(seed % 2 ? 2 : 4));
    suite.layer("dm-module", seed, l, {2, 1, 16, 6}, rng, Mode::kTrain, bn_options());
  }
  {
    backbone::SeBlock<double> l(8, 3);
    suite.stateless("se-block", seed, l, {2, 8, 6}, rng);
  }
  {
    backbone::Res2NetBlock<double> l(12, 4, 3, 2);
    suite.layer("res2net", seed, l, {2, 12, 7}, rng, Mode::kTrain, bn_options());
  }
  {
    backbone::SeRes2Block<double> l(16, 4, 4, 3, 2 + seed % 3);
    suite.layer("se-res2block", seed, l, {2, 16, 8}, rng, Mode::kTrain, bn_options());
  }
  {
    backbone::AttentiveStatsPool<double> l(6, 4);
    suite.layer("asp", seed, l, {3, 6, 9}, rng, Mode::kTrain, bn_options());
  }
  {
    Rng r = rng.split("aam");
    const training::AamConfig cfg{0.2, 30.0, 7};
    auto emb = random_tensor({4, 6}, r);
    auto weight = random_tensor({7, 6}, r);
    std::vector<std::size_t> labels(4);
    for (auto& l : labels) l = r.below(7);
    Tensor<double> ge, gw({7, 6});
    training::aam_softmax_batch(emb, weight, labels, cfg, &ge, &gw);
    std::vector<nn::GradTarget> targets{{"emb", &emb.vec(), ge.vec()}, {"weight", &weight.vec(), gw.vec()}};
    nn::GradCheckOptions opt = bn_options();
    opt.max_coords = 0;
    suite.add({"aam-softmax", seed,
               nn::check_gradients(
                   [&] { return training::aam_softmax_batch<double>(emb, weight, labels, cfg, nullptr, nullptr); },
                   targets, r.split("coords"), opt)});
  }
  for (backbone::ModelVariant v : backbone::kAllVariants) {
    const std::string name = "model:" + std::string(backbone::variant_name(v));
    backbone::Model<double> m(tiny_model(v));
    m.init(rng.split(name + ".init"));
    suite.module(
        name, seed, [&](const Tensor<double>& x) { return m.forward(x, Mode::kEval); },
        [&](const Tensor<double>& g) { return m.backward(g); }, m.params(), random_tensor({3, 1, 16, 8}, rng), rng,
        model_options());
  }
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::size_t seeds, std::uint64_t base_seed) {
  std::vector<GradCheckEntry> out;
  Suite suite(out);
  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t seed = base_seed + i;
    run_seed(suite, seed, Rng(seed).split("gradcheck"));
  }
  return out;
}

std::vector<GradCheckSummary> summarize(const std::vector<GradCheckEntry>& entries) {
  std::vector<GradCheckSummary> rows;
  for (const auto& e : entries) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.name == e.name; });
    if (it == rows.end()) {
      rows.emplace_back().name = e.name;
      it = rows.end() - 1;
    }
    ++it->runs;
    it->checked += e.result.checked;
    if (!e.result.passed) ++it->failures;
    if (e.result.max_rel_error >= it->max_rel_error) {
      it->max_rel_error = e.result.max_rel_error;
      it->worst = e.result.worst;
    }
  }
  return rows;
}

std::string format_gradcheck(const std::vector<GradCheckSummary>& rows) {
  std::string out;
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s runs=%zu coords=%-6zu max_rel=%.3e %s\n", r.name.c_str(), r.runs, r.checked,
                  r.max_rel_error,
                  r.failures ? "FAIL" : "PASS");
    out += buf;
  }
  return out;
}

}  // namespace mfatdnn::cli
