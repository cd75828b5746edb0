#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "mfatdnn/error.hpp"
#include "mfatdnn/frontend/mfa.hpp"
#include "mfatdnn/nn/complexity.hpp"
#include "test_util.hpp"

using namespace mfatdnn;
using namespace mfatdnn::frontend;
using nn::Mode;
using nn::ParamStore;
using nn::Shape;
using nn::Tensor;
using testutil::random_tensor;

namespace {

MfaConfig small_config(std::size_t channels, std::size_t scale, std::size_t mel = 16, std::size_t out = 12) {
  MfaConfig cfg;
  cfg.channels = channels;
  cfg.scale = scale;
  cfg.mel_bins = mel;
  cfg.out_channels = out;
  cfg.reduction = 2;
  return cfg;
}

template <typename T>
ParamStore<T> init_frontend(MfaFrontend<T>& m, std::uint64_t seed) {
  ParamStore<T> store;
  m.collect(store, "front");
  nn::init_params(store, Rng(seed));
  return store;
}

// The dual-pathway chain over explicit groups, mirroring MfaFrontend::forward.
template <typename T>
DmState<T> run_dm(MfaFrontend<T>& m, const std::vector<Tensor<T>>& groups, Mode mode) {
  DmState<T> st;
  st.x = groups;
  const std::size_t n = groups[0].dim(0), len = groups[0].dim(3), flat = m.config().flat_width();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& u = m.units[i];
    st.y.push_back(u.cnn_path_step(groups[i], i ? &st.y[i - 1] : nullptr, mode));
    Tensor<T> f = u.fa.forward(st.y[i]).reshaped({n, flat, len});
    st.gates.push_back(u.fa.gates());
    st.z.push_back(u.tdnn_path_step(f, i ? &st.z[i - 1] : nullptr, mode));
  }
  return st;
}

template <typename T>
Tensor<T> permute_frames(const Tensor<T>& y, const std::vector<std::size_t>& perm) {
  Tensor<T> out(y.shape());
  const std::size_t len = y.dim(y.rank() - 1), rows = y.numel() / len;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < len; ++t) out.vec()[r * len + t] = y.vec()[r * len + perm[t]];
  return out;
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

}  // namespace

TEST_CASE("config presets and validation") {
  const MfaConfig std_cfg = MfaConfig::standard(), lite = MfaConfig::lite();
  CHECK(std_cfg.channels == 32);
  CHECK(std_cfg.scale == 4);
  CHECK(std_cfg.group_channels() == 8);
  CHECK(std_cfg.reduced_freq() == 20);
  CHECK(std_cfg.flat_width() == 160);
  CHECK(std_cfg.out_channels == 512);
  CHECK(lite.channels == 24);
  CHECK(lite.group_channels() == 6);
  CHECK(lite.out_channels == 480);
  MfaConfig bad = std_cfg;
  bad.channels = 30;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = std_cfg;
  bad.mel_bins = 82;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("split then concat is the identity") {
  Rng rng(1);
  for (std::size_t c : {24, 32}) {
    const auto y = random_tensor<float>({2, c, 5, 7}, rng);
    const auto parts = split_scales(y, 4);
    REQUIRE(parts.size() == 4);
    CHECK(parts[0].shape() == Shape{2, c / 4, 5, 7});
    CHECK(nn::concat_channels<float>(parts).vec() == y.vec());
    // contiguous, order-preserving blocks
    CHECK(parts[1].at(1, 0, 3, 4) == y.at(1, c / 4, 3, 4));
  }
  CHECK_THROWS_AS(split_scales(random_tensor<float>({1, 30, 2, 2}, rng), 4), ConfigError);
}

TEST_CASE("stem shape, parameters and zero response") {
  MfaFrontend<float> m(MfaConfig::standard());
  ParamStore<float> store = init_frontend(m, 3);
  Rng rng(2);
  const auto h = m.stem_forward(random_tensor<float>({1, 1, 80, 298}, rng), Mode::kTrain);
  CHECK(h.shape() == Shape{1, 32, 20, 298});
  const std::uint64_t expect = (9 * 1 * 32 + 32) + (9 * 32 * 32 + 32) + 2 * (2 * 32);
  CHECK(nn::count_params(store, "front.stem") == expect);

  // Zero input: the first conv emits its bias everywhere, so only the second
  // layer's zero-padded edge frames can differ from the interior.
  const auto z = m.stem_forward(Tensor<float>({1, 1, 80, 9}), Mode::kEval);
  for (std::size_t c = 0; c < 32; ++c)
    for (std::size_t f = 0; f < 20; ++f)
      for (std::size_t t = 2; t < 8; ++t) CHECK(z.at(0, c, f, t) == z.at(0, c, f, 1));
}

TEST_CASE("per-scale TDNN and fusion parameter counts") {
  MfaFrontend<float> m(MfaConfig::standard());
  ParamStore<float> store = init_frontend(m, 0);
  CHECK(nn::count_params(store, "front.scale1.tdnn.conv") == 76960);
  CHECK(nn::count_params(store, "front.scale1.tdnn.bn") == 320);
  CHECK(nn::count_params(store, "front.fusion.conv") == 328192);
  CHECK(nn::count_params(store, "front.scale1.fa") == 160 * 20 + 20 + 20 * 160 + 160);
}

TEST_CASE("shape contracts over scale, channels and length") {
  for (std::size_t s : {2, 4})
    for (std::size_t c : {24, 32})
      for (std::size_t len : {50, 298}) {
        CAPTURE(s);
        CAPTURE(c);
        CAPTURE(len);
        MfaConfig cfg = MfaConfig::standard();
        cfg.channels = c;
        cfg.scale = s;
        cfg.out_channels = c == 24 ? 480 : 512;
        MfaFrontend<float> m(cfg);
        init_frontend(m, s * 100 + c);
        Rng rng(len);
        const auto out = m.forward(random_tensor<float>({1, 1, 80, len}, rng), Mode::kEval);
        CHECK(out.shape() == Shape{1, cfg.out_channels, len});
        CHECK(m.state().z.size() == s);
        CHECK(m.state().z[0].shape() == Shape{1, (c / s) * 20, len});
      }
}

TEST_CASE("hierarchical dependency in both pathways") {
  for (std::size_t s : {2, 4})
    for (std::size_t c : {8, 12}) {
      MfaFrontend<double> m(small_config(c, s));
      init_frontend(m, 7 + s + c);
      Rng rng(s * c);
      const std::size_t n = c / s;
      std::vector<Tensor<double>> groups;
      for (std::size_t i = 0; i < s; ++i) groups.push_back(random_tensor<double>({2, n, 4, 9}, rng));
      const auto base = run_dm(m, groups, Mode::kTrain);
      for (std::size_t j = 0; j < s; ++j) {
        CAPTURE(j);
        auto pert = groups;
        for (auto& v : pert[j].vec()) v += 0.5 * rng.normal();
        const auto st = run_dm(m, pert, Mode::kTrain);
        for (std::size_t i = 0; i < j; ++i) {
          CHECK(st.y[i].vec() == base.y[i].vec());
          CHECK(st.z[i].vec() == base.z[i].vec());
        }
        bool y_changed = false, z_changed = false;
        for (std::size_t i = j; i < s; ++i) {
          y_changed |= st.y[i].vec() != base.y[i].vec();
          z_changed |= st.z[i].vec() != base.z[i].vec();
        }
        CHECK(y_changed);
        CHECK(z_changed);
      }
    }
}

TEST_CASE("CNN pathway telescopes with identity kernels") {
  MfaFrontend<double> m(small_config(8, 4));
  init_frontend(m, 1);
  for (auto& u : m.units) {
    auto& w = u.cnn.conv.weight.value;
    w.fill(0.0);
    for (std::size_t c = 0; c < 2; ++c) w.at(c, c, 1, 1) = 1.0;
    u.cnn.conv.bias.value.fill(0.0);
    u.cnn.bn.running_mean.value.fill(0.0);
    u.cnn.bn.running_var.value.fill(1.0 - nn::BatchNorm<double>::kEps);
  }
  Rng rng(4);
  std::vector<Tensor<double>> groups;
  for (int i = 0; i < 4; ++i) {
    auto g = random_tensor<double>({1, 2, 4, 6}, rng);
    for (auto& v : g.vec()) v = std::abs(v);
    groups.push_back(g);
  }
  const auto st = run_dm(m, groups, Mode::kEval);
  Tensor<double> acc({1, 2, 4, 6});
  for (std::size_t i = 0; i < 4; ++i) {
    acc += groups[i];
    for (std::size_t k = 0; k < acc.numel(); ++k) CHECK(st.y[i].vec()[k] == doctest::Approx(acc.vec()[k]).epsilon(1e-12));
  }
}

TEST_CASE("FA squeeze") {
  Rng rng(5);
  const auto y = random_tensor<double>({2, 3, 4, 11}, rng);
  const auto d = fa_squeeze(y);
  CHECK(d.shape() == Shape{2, 12});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t f = 0; f < 4; ++f) {
        double m = 0;
        for (std::size_t t = 0; t < 11; ++t) m += y.at(n, c, f, t);
        CHECK(d.at(n, c * 4 + f) == doctest::Approx(m / 11).epsilon(1e-6));
      }
  const auto dp = fa_squeeze(permute_frames(y, random_perm(11, rng)));
  for (std::size_t k = 0; k < d.numel(); ++k) CHECK(dp.vec()[k] == doctest::Approx(d.vec()[k]).epsilon(1e-14));

  Tensor<double> constant({1, 2, 3, 5});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t t = 0; t < 5; ++t) constant.at(0, c, f, t) = c * 10.0 + f;
  const auto dc = fa_squeeze(constant);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t f = 0; f < 3; ++f) CHECK(dc.at(0, c * 3 + f) == c * 10.0 + f);
}

TEST_CASE("FA excitation and application") {
  Rng rng(6);
  FaBlock<double> fa(12, 3);
  ParamStore<double> store;
  fa.collect(store, "fa");
  SUBCASE("zero weights give gates of one half") {
    const auto g = fa.excite(random_tensor<double>({2, 12}, rng));
    for (double v : g.vec()) CHECK(v == 0.5);
  }
  SUBCASE("saturated bias makes the block an identity") {
    fa.fc2.bias.value.fill(20.0);
    const auto y = random_tensor<double>({1, 3, 4, 6}, rng);
    const auto out = fa.forward(y);
    for (std::size_t k = 0; k < y.numel(); ++k) CHECK(out.vec()[k] == doctest::Approx(y.vec()[k]).epsilon(1e-8));
  }
  SUBCASE("gates lie strictly inside (0, 1)") {
    nn::init_params(store, rng);
    const auto g = fa.excite(random_tensor<double>({4, 12}, rng, 5.0));
    for (double v : g.vec()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("apply with constant gates") {
    const auto y = random_tensor<double>({1, 3, 4, 6}, rng);
    CHECK(fa_apply(y, Tensor<double>({1, 12}, 1.0)).vec() == y.vec());
    const auto closed = fa_apply(y, Tensor<double>({1, 12}, 0.0));
    for (double v : closed.vec()) CHECK(v == 0.0);
    CHECK_THROWS_AS(fa_apply(y, Tensor<double>({1, 11}, 1.0)), ShapeError);
  }
  SUBCASE("block commutes with frame permutations") {
    nn::init_params(store, rng);
    for (int trial = 0; trial < 10; ++trial) {
      const auto y = random_tensor<double>({2, 3, 4, 9}, rng);
      const auto perm = random_perm(9, rng);
      const auto a = fa.forward(permute_frames(y, perm));
      const auto ga = fa.gates();
      const auto b = permute_frames(fa.forward(y), perm);
      const auto gb = fa.gates();
      for (std::size_t k = 0; k < a.numel(); ++k) CHECK(a.vec()[k] == doctest::Approx(b.vec()[k]).epsilon(1e-12));
      for (std::size_t k = 0; k < ga.numel(); ++k) CHECK(ga.vec()[k] == doctest::Approx(gb.vec()[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("FA gates of one scale depend only on that scale's map") {
  MfaFrontend<double> m(small_config(8, 4));
  init_frontend(m, 9);
  Rng rng(10);
  std::vector<Tensor<double>> y;
  for (int i = 0; i < 4; ++i) y.push_back(random_tensor<double>({1, 2, 4, 7}, rng));
  std::vector<Tensor<double>> base;
  for (std::size_t i = 0; i < 4; ++i) {
    m.units[i].fa.forward(y[i]);
    base.push_back(m.units[i].fa.gates());
  }
  for (std::size_t j = 0; j < 4; ++j) {
    auto pert = y;
    for (auto& v : pert[j].vec()) v += rng.normal();
    for (std::size_t i = 0; i < 4; ++i) {
      m.units[i].fa.forward(pert[i]);
      if (i != j)
        CHECK(m.units[i].fa.gates().vec() == base[i].vec());
      else
        CHECK(m.units[i].fa.gates().vec() != base[i].vec());
    }
  }
}

TEST_CASE("TDNN pathway zero input and shape errors") {
  MfaFrontend<double> m(small_config(8, 4));
  init_frontend(m, 2);
  const auto z = m.units[0].tdnn_path_step(Tensor<double>({1, 8, 6}), nullptr, Mode::kEval);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t t = 1; t < 6; ++t) CHECK(z.at(0, c, t) == z.at(0, c, 0));
  CHECK_THROWS_AS(m.units[0].tdnn_path_step(Tensor<double>({1, 7, 6}), nullptr, Mode::kEval), ShapeError);
  const Tensor<double> prev({1, 8, 5});
  CHECK_THROWS_AS(m.units[1].tdnn_path_step(Tensor<double>({1, 8, 6}), &prev, Mode::kEval), ShapeError);
  const Tensor<double> yprev({1, 2, 4, 5});
  CHECK_THROWS_AS(m.units[1].cnn_path_step(Tensor<double>({1, 2, 4, 6}), &yprev, Mode::kEval), ShapeError);
}

TEST_CASE("fusion uses every scale") {
  MfaFrontend<double> m(small_config(8, 4));
  init_frontend(m, 12);
  Rng rng(13);
  const auto x = random_tensor<double>({1, 1, 16, 8}, rng);
  const auto out = m.forward(x, Mode::kEval);
  auto z = m.state().z;
  CHECK(m.fuse_scales(z, Mode::kEval).vec() == out.vec());
  z[3].fill(0.0);
  CHECK(m.fuse_scales(z, Mode::kEval).vec() != out.vec());
}

TEST_CASE("gating never increases a monotone front-end's output") {
  // Non-negative TDNN and fusion weights with neutral eval-mode batchnorm make
  // everything after the gates monotone in them.
  MfaFrontend<double> m(small_config(8, 4));
  init_frontend(m, 21);
  for (auto& u : m.units) {
    for (auto& v : u.tdnn.conv.weight.value.vec()) v = std::abs(v);
    u.tdnn.conv.bias.value.fill(0.0);
  }
  for (auto& v : m.fusion.conv.weight.value.vec()) v = std::abs(v);
  m.fusion.conv.bias.value.fill(0.0);
  Rng rng(22);
  const auto x = random_tensor<double>({1, 1, 16, 10}, rng);
  const auto gated = m.forward(x, Mode::kEval);
  for (auto& u : m.units) u.fa.fc2.bias.value.fill(50.0);
  const auto open = m.forward(x, Mode::kEval);
  for (double g : m.state().gates[0].vec()) CHECK(g == 1.0);
  for (std::size_t k = 0; k < gated.numel(); ++k) CHECK(std::abs(gated.vec()[k]) <= std::abs(open.vec()[k]) + 1e-12);
}

TEST_CASE("forward is deterministic") {
  MfaFrontend<float> m(MfaConfig::lite());
  init_frontend(m, 4);
  Rng rng(3);
  const auto x = random_tensor<float>({2, 1, 80, 40}, rng);
  CHECK(m.forward(x, Mode::kTrain).vec() == m.forward(x, Mode::kTrain).vec());
}

TEST_CASE("gradient checks: FA block and full MFA module") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    Rng rng(500 + seed);
    {
      FaBlock<double> fa(12, 3);
      ParamStore<double> s;
      fa.collect(s, "fa");
      nn::init_params(s, rng.split("init"));
      auto y = random_tensor<double>({2, 3, 4, 5}, rng);
      const auto r = testutil::check_module([&](const auto& in) { return fa.forward(in); },
                                            [&](const auto& g) { return fa.backward(g); }, s, y, rng);
      CHECK_MESSAGE(r.passed, "FA ", r.worst);
    }
    {
      MfaFrontend<double> m(small_config(8, seed % 2 ? 2 : 4));
      ParamStore<double> s = init_frontend(m, seed);
      auto x = random_tensor<double>({2, 1, 16, 6}, rng);
      // Conv biases feeding train-mode batchnorm have an exactly zero gradient.
      nn::GradCheckOptions opt;
      opt.abs_tolerance = 1e-8;
      const auto r = testutil::check_module([&](const auto& in) { return m.forward(in, Mode::kTrain); },
                                            [&](const auto& g) { return m.backward(g); }, s, x, rng, true, opt);
      CHECK_MESSAGE(r.passed, "MFA ", r.worst);
    }
  }
}

TEST_CASE("MAC trace covers every layer") {
  MfaFrontend<float> m(MfaConfig::standard());
  nn::MacTrace trace;
  m.trace_macs(trace, "front", 300);
  CHECK(trace.front().macs == 9ULL * 1 * 32 * 40 * 300);
  CHECK(trace.back().macs == 640ULL * 512 * 300);
  CHECK(nn::total_macs(trace) > 0);
}
