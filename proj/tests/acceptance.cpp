// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "mfatdnn/backbone/checkpoint.hpp"
#include "mfatdnn/backbone/model.hpp"
#include "mfatdnn/cli/complexity_report.hpp"
#include "mfatdnn/cli/gradcheck_suite.hpp"
#include "mfatdnn/error.hpp"
#include "mfatdnn/eval/metrics.hpp"
#include "mfatdnn/eval/scoring.hpp"
#include "mfatdnn/eval/truncate.hpp"
#include "mfatdnn/features/archive.hpp"
#include "mfatdnn/features/fbank.hpp"
#include "mfatdnn/features/synth.hpp"
#include "mfatdnn/frontend/mfa.hpp"
#include "mfatdnn/training/aam.hpp"
#include "mfatdnn/training/optim.hpp"
#include "mfatdnn/training/trainer.hpp"

namespace {

using namespace mfatdnn;
namespace fs = std::filesystem;
using nn::Mode;
using nn::Tensor;

// Collects failed sub-checks of one criterion.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    ++checks_;
    if (!ok) {
      ++failed_;
      if (failed_ <= 10) std::printf("  failed: %s\n", what.c_str());
    }
  }
  void note(const std::string& s) { std::printf("  %s\n", s.c_str()); }
  bool passed() const { return failed_ == 0 && checks_ > 0; }
  std::size_t checks() const { return checks_; }
  std::size_t failed() const { return failed_; }

 private:
  std::size_t checks_ = 0, failed_ = 0;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

template <typename T>
Tensor<T> random_tensor(const nn::Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.vec()) v = static_cast<T>(scale * rng.normal());
  return t;
}

// ---------------------------------------------------------------- 1
void complexity(Verdict& v) {
  using backbone::ModelVariant;
  const auto r = cli::complexity_report({backbone::kAllVariants.begin(), backbone::kAllVariants.end()});
  for (const auto& c : r.variants) {
    const std::string name(backbone::variant_name(c.variant));
    v.note(name + fmt(" params=%.0f (%+.2f%% of target, tol %.0f%%) macs=%.3fG", static_cast<double>(c.params),
                      100 * c.param_deviation, 100 * c.param_tolerance, static_cast<double>(c.macs) / 1e9));
    v.check(c.params_within, name + " params outside tolerance");
    std::uint64_t p = 0, m = 0;
    for (const auto& b : c.breakdown) {
      p += b.params;
      m += b.macs;
    }
    v.check(p == c.params && m == c.macs, name + " breakdown does not sum to the totals");
  }
  v.check(r.param_ordering.value_or(false), "parameter ordering mfa-lite < ecapa-tdnn < mfa-standard < ecapa-cnn-tdnn");
  v.check(r.mac_ordering.value_or(false), "MAC ordering mfa-lite < ecapa-tdnn < mfa-standard < ecapa-cnn-tdnn");
}

// ---------------------------------------------------------------- 2
void gradients(Verdict& v) {
  const auto rows = cli::summarize(cli::run_gradcheck_suite(10, 0));
  const std::set<std::string> required{"conv1d",     "conv2d",         "linear",     "batchnorm-train",
                                       "batchnorm-eval", "relu",       "sigmoid",    "tanh",
                                       "softmax",    "time-mean",      "tdnn-block", "conv-bn-relu-2d",
                                       "fa-block",   "dm-module",      "se-block",   "res2net",
                                       "se-res2block", "asp",          "aam-softmax"};
  std::set<std::string> seen;
  double worst = 0;
  for (const auto& r : rows) {
    seen.insert(r.name);
    worst = std::max(worst, r.max_rel_error);
    v.check(r.runs >= 10, r.name + " ran on fewer than 10 seeds");
    v.check(r.failures == 0 && r.max_rel_error < 1e-4, r.name + " max relative error " +
                                                           fmt("%.3e", r.max_rel_error) + " at " + r.worst);
  }
  for (const auto& n : required) v.check(seen.count(n) == 1, "no gradient check for " + n);
  v.note(fmt("%.0f checks x 10 seeds, worst relative error %.3e", static_cast<double>(rows.size()), worst));
}

// ---------------------------------------------------------------- 3
template <typename T>
frontend::DmState<T> run_chain(frontend::MfaFrontend<T>& m, const std::vector<Tensor<T>>& groups) {
  frontend::DmState<T> st;
  st.x = groups;
  const std::size_t n = groups[0].dim(0), len = groups[0].dim(3), flat = m.config().flat_width();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& u = m.units[i];
    st.y.push_back(u.cnn_path_step(groups[i], i ? &st.y[i - 1] : nullptr, Mode::kEval));
    Tensor<T> f = u.fa.forward(st.y[i]).reshaped({n, flat, len});
    st.gates.push_back(u.fa.gates());
    st.z.push_back(u.tdnn_path_step(f, i ? &st.z[i - 1] : nullptr, Mode::kEval));
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

void mfa_invariants(Verdict& v) {
  for (std::size_t s : {2, 4})
    for (std::size_t c : {24, 32})
      for (std::size_t len : {50, 298}) {
        const std::string tag = "s=" + std::to_string(s) + " C=" + std::to_string(c) + " L=" + std::to_string(len);
        frontend::MfaConfig cfg = frontend::MfaConfig::standard();
        cfg.channels = c;
        cfg.scale = s;
        cfg.out_channels = c == 24 ? 480 : 512;
        frontend::MfaFrontend<double> m(cfg);
        nn::ParamStore<double> store;
        m.collect(store, "front");
        nn::init_params(store, Rng(s * 1000 + c * 10 + len));
        Rng rng(len + c + s);

        // Output shape contract [1, 80, L] -> [C_E, L].
        const auto out = m.forward(random_tensor<double>({1, 1, 80, len}, rng), Mode::kEval);
        v.check(out.shape() == nn::Shape{1, cfg.out_channels, len}, tag + " output shape");
        bool finite = true;
        for (double x : out.vec()) finite = finite && std::isfinite(x);
        v.check(finite, tag + " output finite");

        // Split / concat identity on the stem output.
        const auto stem = m.stem_forward(random_tensor<double>({1, 1, 80, len}, rng), Mode::kEval);
        const auto groups = frontend::split_scales(stem, s);
        v.check(groups.size() == s && groups[0].shape() == nn::Shape{1, c / s, 20, len}, tag + " split shapes");
        v.check(nn::concat_channels<double>(groups).vec() == stem.vec(), tag + " split/concat identity");

        // Hierarchical dependency probes in both pathways.
        const auto base = run_chain(m, groups);
        for (std::size_t j = 0; j < s; ++j) {
          auto pert = groups;
          for (auto& x : pert[j].vec()) x += 0.5 * rng.normal();
          const auto st = run_chain(m, pert);
          bool before_same = true, after_y = false, after_z = false;
          for (std::size_t i = 0; i < j; ++i)
            before_same = before_same && st.y[i].vec() == base.y[i].vec() && st.z[i].vec() == base.z[i].vec();
          for (std::size_t i = j; i < s; ++i) {
            after_y = after_y || st.y[i].vec() != base.y[i].vec();
            after_z = after_z || st.z[i].vec() != base.z[i].vec();
          }
          v.check(before_same, tag + " perturbing group " + std::to_string(j) + " changed an earlier scale");
          v.check(after_y && after_z, tag + " perturbing group " + std::to_string(j) + " left later scales unchanged");
        }

        // FA gate range and frame-permutation equivariance.
        for (std::size_t i = 0; i < s; ++i) {
          const auto& g = base.gates[i];
          bool in_range = true;
          for (double x : g.vec()) in_range = in_range && x > 0.0 && x < 1.0;
          v.check(in_range, tag + " FA gates outside (0, 1)");
        }
        auto& fa = m.units[0].fa;
        std::vector<std::size_t> perm(len);
        for (std::size_t t = 0; t < len; ++t) perm[t] = t;
        for (std::size_t t = len; t > 1; --t) std::swap(perm[t - 1], perm[rng.below(t)]);
        const auto& y = base.y[0];
        const auto a = fa.forward(permute_frames(y, perm));
        const auto b = permute_frames(fa.forward(y), perm);
        double err = 0;
        for (std::size_t k = 0; k < a.numel(); ++k)
          err = std::max(err, std::abs(a.vec()[k] - b.vec()[k]) / std::max(1.0, std::abs(b.vec()[k])));
        v.check(err <= 1e-12, tag + fmt(" FA permutation equivariance error %.3e", err));
      }
}

// ---------------------------------------------------------------- 4
double brute_eer(const std::vector<double>& s, const std::vector<bool>& tgt) {
  std::vector<double> th{-std::numeric_limits<double>::infinity()};
  std::set<double> distinct(s.begin(), s.end());
  th.insert(th.end(), distinct.begin(), distinct.end());
  th.push_back(std::numeric_limits<double>::infinity());
  double nt = 0, nn_ = 0;
  for (bool b : tgt) (b ? nt : nn_) += 1;
  std::vector<double> pm, pf;
  for (double t : th) {
    double miss = 0, fa = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (tgt[i] && s[i] < t) ++miss;
      if (!tgt[i] && s[i] >= t) ++fa;
    }
    pm.push_back(miss / nt);
    pf.push_back(fa / nn_);
  }
  // P_miss rises and P_fa falls along the sweep: the EER sits at the first
  // threshold where P_miss >= P_fa, or on the segment leading to it.
  for (std::size_t i = 0; i < th.size(); ++i) {
    if (pm[i] < pf[i]) continue;
    if (pm[i] == pf[i] || i == 0) return pm[i];
    const double t = (pf[i - 1] - pm[i - 1]) / ((pm[i] - pm[i - 1]) - (pf[i] - pf[i - 1]));
    return pm[i - 1] + t * (pm[i] - pm[i - 1]);
  }
  return 1.0;
}

double brute_mindcf(const std::vector<double>& s, const std::vector<bool>& tgt, const eval::DcfParams& p) {
  std::vector<double> th{-std::numeric_limits<double>::infinity()};
  std::set<double> distinct(s.begin(), s.end());
  th.insert(th.end(), distinct.begin(), distinct.end());
  th.push_back(std::numeric_limits<double>::infinity());
  double nt = 0, nn_ = 0;
  for (bool b : tgt) (b ? nt : nn_) += 1;
  double best = std::numeric_limits<double>::infinity();
  for (double t : th) {
    double miss = 0, fa = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (tgt[i] && s[i] < t) ++miss;
      if (!tgt[i] && s[i] >= t) ++fa;
    }
    best = std::min(best, p.c_miss * p.p_target * (miss / nt) + p.c_fa * (1 - p.p_target) * (fa / nn_));
  }
  return best / std::min(p.c_miss * p.p_target, p.c_fa * (1 - p.p_target));
}

void metric_oracles(Verdict& v) {
  Rng rng(2024);
  const eval::DcfParams dcf;
  std::size_t exact = 0;
  for (int set = 0; set < 200; ++set) {
    const std::size_t n = 2 + rng.below(19);
    std::vector<double> s(n);
    std::vector<bool> tgt(n);
    tgt[0] = true;
    tgt[1] = false;
    for (std::size_t i = 2; i < n; ++i) tgt[i] = rng.below(2);
    for (std::size_t i = 0; i < n; ++i) s[i] = set % 3 == 0 ? static_cast<double>(rng.below(5)) : rng.normal();
    auto flags = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) flags[i] = tgt[i];
    const std::span<const bool> f(flags.get(), n);
    const double eer = eval::compute_eer(s, f), mdcf = eval::compute_mindcf(s, f, dcf);
    const bool same = eer == brute_eer(s, tgt) && mdcf == brute_mindcf(s, tgt, dcf);
    exact += same;
    v.check(same, "oracle mismatch on set " + std::to_string(set));

    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(0.5 * s[i]) * 3.0 - 1.0;
    v.check(eval::compute_eer(t, f) == eer && eval::compute_mindcf(t, f, dcf) == mdcf,
            "monotone transform changed the metrics on set " + std::to_string(set));
  }
  v.note(fmt("%.0f/200 random sets match the threshold-sweep oracle exactly", static_cast<double>(exact)));

  // S-norm affine invariance: scaling and shifting raw, cohort-side scores
  // together leaves normalized scores unchanged.
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> ce(12), ct(12);
    for (auto& x : ce) x = rng.normal();
    for (auto& x : ct) x = rng.normal();
    const double raw = rng.normal(), a = rng.uniform(0.1, 10.0), b = rng.normal() * 5;
    std::vector<double> ce2(ce), ct2(ct);
    for (auto& x : ce2) x = a * x + b;
    for (auto& x : ct2) x = a * x + b;
    for (std::size_t k : {std::size_t{0}, std::size_t{5}}) {
      const double s1 = eval::snorm(raw, {eval::side_stats(ce, k), eval::side_stats(ct, k), 12});
      const double s2 = eval::snorm(a * raw + b, {eval::side_stats(ce2, k), eval::side_stats(ct2, k), 12});
      worst = std::max(worst, std::abs(s1 - s2));
    }
  }
  v.check(worst <= 1e-9, fmt("S-norm affine invariance error %.3e", worst));
  v.note(fmt("S-norm affine invariance worst error %.3e", worst));
}

// ---------------------------------------------------------------- 5
struct ToyRun {
  training::TrainResult result;
  double test_eer = 0.0;
};

ToyRun toy_run(const features::SynthCorpus& corpus, const training::TrainConfig& cfg) {
  ToyRun r;
  r.result = training::train_toy(corpus, backbone::ModelVariant::kMfaStandard, cfg);
  training::LabeledFeatures test;
  for (std::size_t u : corpus.utterances_in(features::Split::kTest)) {
    const auto& spec = corpus.utterances[u];
    test.maps.push_back(features::compute_fbank(features::render_utterance(corpus, spec), {}, spec.id));
    test.labels.push_back(spec.speaker);
  }
  r.test_eer = training::validation_eer(*r.result.model, test);
  return r;
}

void toy_training(Verdict& v) {
  features::SynthConfig sc;
  sc.seed = 7;
  const auto corpus = features::synth_corpus(sc);
  training::TrainConfig tc;
  tc.seed = 7;
  v.check(corpus.speakers_in(features::Split::kTrain).size() == 10, "training corpus has 10 speakers");
  v.check(tc.total_steps() >= 300, "at least 300 steps");
  const ToyRun a = toy_run(corpus, tc);
  const ToyRun b = toy_run(corpus, tc);
  const double ratio = a.result.final_loss / a.result.initial_loss;
  v.note(fmt("steps=%.0f initial_loss=%.4f final_loss=%.4f ratio=%.4f", static_cast<double>(tc.total_steps()),
             a.result.initial_loss, a.result.final_loss, ratio));
  v.note(fmt("held-out synthetic-trial EER %.2f%%", 100 * a.test_eer));
  v.check(ratio <= 0.5, fmt("final/initial loss ratio %.4f > 0.5", ratio));
  v.check(a.test_eer <= 0.15, fmt("test EER %.4f > 0.15", a.test_eer));
  v.check(a.result.step_losses == b.result.step_losses && a.result.log() == b.result.log() &&
              a.test_eer == b.test_eer,
          "two same-seed runs differ");
  bool same_params = true;
  const auto& pa = a.result.model->params();
  const auto& pb = b.result.model->params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    same_params = same_params && pa.entries()[i].param->value.vec() == pb.entries()[i].param->value.vec();
  v.check(same_params, "two same-seed runs end with different parameters");
}

// ---------------------------------------------------------------- 6
void truncation(Verdict& v) {
  const int sr = 16000;
  Rng rng(66);
  std::vector<eval::Utterance> utts;
  for (int i = 0; i < 12; ++i) {
    features::Waveform w;
    w.sample_rate = sr;
    w.samples.resize(static_cast<std::size_t>((3.0 + i * 0.8) * sr) + rng.below(100));
    for (auto& x : w.samples) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    utts.push_back({"u" + std::to_string(i), w});
  }
  eval::TrialList trials;
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j) trials.add((i + j) % 3 == 0, utts[i].id, utts[j].id);
  for (int d = 4; d <= 10; ++d) {
    const std::string tag = std::to_string(d) + " s: ";
    const auto out = eval::truncate_testset(utts, trials, d);
    v.check(out.trials.str() == trials.str() && out.trials.size() == trials.size(), tag + "trials changed");
    v.check(out.utterances.size() == utts.size(), tag + "utterance count changed");
    const std::size_t cap = static_cast<std::size_t>(std::llround(d * static_cast<double>(sr)));
    std::size_t cut = 0, kept = 0;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      const auto& in = utts[i].wave.samples;
      const auto& o = out.utterances[i].wave.samples;
      if (in.size() > cap) {
        ++cut;
        v.check(o.size() == cap && std::equal(o.begin(), o.end(), in.begin()),
                tag + utts[i].id + " not cut to exactly the first " + std::to_string(d) + " s");
      } else {
        ++kept;
        v.check(o == in, tag + utts[i].id + " shorter utterance altered");
      }
      v.check(out.utterances[i].id == utts[i].id, tag + "utterance ids changed");
    }
    v.check(cut > 0 && kept > 0, tag + "corpus does not exercise both cases");
    const auto again = eval::truncate_testset(out.utterances, out.trials, d);
    bool idem = again.trials.str() == out.trials.str();
    for (std::size_t i = 0; i < utts.size(); ++i)
      idem = idem && again.utterances[i].wave.samples == out.utterances[i].wave.samples;
    v.check(idem, tag + "not idempotent");
  }
}

// ---------------------------------------------------------------- 7
void persistence(Verdict& v) {
  const fs::path dir = fs::temp_directory_path() / "mfatdnn_acceptance";
  fs::create_directories(dir);
  features::SynthConfig sc;
  sc.train_speakers = 2;
  sc.valid_speakers = sc.test_speakers = sc.cohort_speakers = 0;
  sc.utts_per_speaker = 1;
  sc.seed = 3;
  const auto corpus = features::synth_corpus(sc);
  const auto fmap = features::compute_fbank(features::render_utterance(corpus, corpus.utterances[0]), {},
                                            corpus.utterances[0].id);

  // Feature archive round trip.
  features::write_feature_archive(dir / "f.mfaf", fmap);
  const auto back = features::read_feature_archive(dir / "f.mfaf");
  v.check(back.data.shape() == fmap.data.shape() && back.data.vec() == fmap.data.vec() && back.id == fmap.id &&
              back.frame_hop_s == fmap.frame_hop_s,
          "feature archive round trip is not bit-exact");

  // Checkpoint save -> load -> embed, every variant.
  for (backbone::ModelVariant var : backbone::kAllVariants) {
    const std::string name(backbone::variant_name(var));
    backbone::Model<float> m(backbone::ModelConfig::toy(var, 0.125, 16));
    m.init(Rng(11).split(name));
    const fs::path p = dir / (name + ".ckpt");
    backbone::save_checkpoint(m, p, 42);
    backbone::CheckpointInfo info;
    auto loaded = backbone::load_checkpoint(p, &info);
    const auto e1 = backbone::embed(m, fmap.data);
    const auto e2 = backbone::embed(*loaded, fmap.data);
    v.check(e1 == e2 && info.step == 42, name + " checkpoint save/load/embed is not bit-exact");
  }

  // Cross-variant load fails closed and names a parameter.
  backbone::Model<float> target(backbone::ModelConfig::toy(backbone::ModelVariant::kMfaStandard, 0.125, 16));
  std::vector<std::vector<float>> before;
  for (const auto& e : target.params()) before.push_back(e.param->value.vec());
  bool diagnosed = false;
  try {
    backbone::load_checkpoint_into(target, dir / "ecapa-tdnn.ckpt");
  } catch (const ShapeMismatchError& e) {
    diagnosed = !e.param().empty() && std::string(e.what()).find(e.param()) != std::string::npos;
    v.note("cross-variant load: " + std::string(e.what()));
  } catch (const std::exception& e) {
    v.check(false, std::string("cross-variant load raised the wrong error: ") + e.what());
  }
  v.check(diagnosed, "cross-variant load did not fail with a diagnostic naming the parameter");
  bool untouched = true;
  std::size_t i = 0;
  for (const auto& e : target.params()) untouched = untouched && e.param->value.vec() == before[i++];
  v.check(untouched, "failed cross-variant load modified the target");
  fs::remove_all(dir);
}

// ---------------------------------------------------------------- 8
void recipe(Verdict& v) {
  training::CyclicLrSchedule s;
  s.cycle_steps = 1000;
  bool endpoints = true;
  for (std::uint64_t c = 0; c < 4; ++c) {
    endpoints = endpoints && training::cyclical_lr(c * 1000, s) == 1e-8;
    endpoints = endpoints && training::cyclical_lr(c * 1000 + 500, s) == 1e-3;
  }
  v.check(endpoints, "cyclical_lr misses 1e-8 / 1e-3 at the cycle endpoints");

  Rng rng(8);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(8), e = 3 + rng.below(6);
    const auto w = random_tensor<double>({k, e}, rng);
    std::vector<double> emb(e);
    for (auto& x : emb) x = rng.normal();
    const std::size_t label = rng.below(k);
    const double loss = training::aam_softmax_loss(emb, w, label, {0.0, 1.0, k}).loss;
    double en = 0;
    for (double x : emb) en += x * x;
    std::vector<double> logits(k);
    for (std::size_t j = 0; j < k; ++j) {
      double dot = 0, wn = 0;
      for (std::size_t d = 0; d < e; ++d) {
        dot += emb[d] * w.at(j, d);
        wn += w.at(j, d) * w.at(j, d);
      }
      logits[j] = dot / std::sqrt(en * wn);
    }
    double z = 0;
    for (double l : logits) z += std::exp(l);
    worst = std::max(worst, std::abs(loss - (std::log(z) - logits[label])));
  }
  v.check(worst <= 1e-10, fmt("AAM (m=0, s=1) differs from softmax cross-entropy by %.3e", worst));

  nn::Param<double> p(nn::Shape{4, 5}, nn::Init::kZeros);
  for (auto& x : p.value.vec()) x = rng.normal();
  nn::ParamStore<double> store;
  store.add("w", p);
  training::Adam<double> adam(store);
  bool exact = true;
  for (double lr : {1e-3, 5e-4, 1e-8}) {
    const auto prev = p.value.vec();
    p.grad.fill(0.0);
    adam.step(lr);
    for (std::size_t i = 0; i < prev.size(); ++i) exact = exact && p.value.vec()[i] == prev[i] * (1 - lr * 2e-5);
  }
  v.check(exact, "decay-only Adam step is not exactly p * (1 - lr * 2e-5)");
  v.note(fmt("AAM vs cross-entropy worst difference %.3e", worst));
}

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // 0: none
  std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "complexity reproduction", 5, complexity},
      {2, "gradient integrity", 120, gradients},
      {3, "MFA structural invariants", 0, mfa_invariants},
      {4, "metric oracle equivalence", 0, metric_oracles},
      {5, "toy training efficacy", 900, toy_training},
      {6, "truncation harness fidelity", 0, truncation},
      {7, "persistence", 0, persistence},
      {8, "training-recipe fidelity", 0, recipe},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.check(false, std::string("unexpected exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit_s > 0) v.check(secs < c.time_limit_s, fmt("runtime %.1f s over the %.0f s limit", secs, c.time_limit_s));
    std::printf("%s criterion %d (%s): %zu checks, %zu failed, %.1f s\n", v.passed() ? "PASS" : "FAIL", c.id, c.name,
                v.checks(), v.failed(), secs);
    std::fflush(stdout);
    failures += !v.passed();
  }
  return failures ? 1 : 0;
}
