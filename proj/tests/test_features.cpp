#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <cstring>
#include <set>

#include "mfatdnn/error.hpp"
#include "mfatdnn/features/archive.hpp"
#include "mfatdnn/features/augment.hpp"
#include "mfatdnn/features/audio.hpp"
#include "mfatdnn/features/fbank.hpp"
#include "mfatdnn/features/synth.hpp"

using namespace mfatdnn;
using namespace mfatdnn::features;

namespace {

Waveform sine(double hz, double seconds, double amp = 0.5, int sr = 16000) {
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * sr)));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / sr));
  return w;
}

FeatureMap random_map(std::size_t bins, std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMap f;
  f.data = nn::Tensor<float>({1, bins, frames});
  for (auto& v : f.data.vec()) v = static_cast<float>(rng.normal());
  f.id = "map";
  return f;
}

std::vector<double> time_average(const FeatureMap& f) {
  std::vector<double> m(f.bins(), 0.0);
  for (std::size_t d = 0; d < f.bins(); ++d) {
    for (std::size_t t = 0; t < f.frames(); ++t) m[d] += f.at(d, t);
    m[d] /= static_cast<double>(f.frames());
  }
  return m;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mfatdnn_test_features_" + name);
}

}  // namespace

TEST_CASE("fbank frame count") {
  const FbankConfig cfg;
  CHECK(cfg.frames_for_seconds(3.0) == 298);
  const FeatureMap f = compute_fbank(sine(440, 3.0), cfg);
  CHECK(f.bins() == 80);
  CHECK(f.frames() == 298);
  CHECK(f.data.dim(0) == 1);
  CHECK(f.frame_hop_s == doctest::Approx(0.01));
}

TEST_CASE("fbank of silence is the log floor") {
  FbankConfig cfg;
  cfg.mean_norm = false;
  Waveform w;
  w.samples.assign(16000, 0.0f);
  const FeatureMap f = compute_fbank(w, cfg);
  const float floor = static_cast<float>(std::log(cfg.log_floor));
  for (float v : f.data.vec()) CHECK(v == doctest::Approx(floor).epsilon(1e-6));
}

TEST_CASE("fbank of a tone peaks at the matching mel bin") {
  FbankConfig cfg;
  cfg.mean_norm = false;
  const auto centers = mel_center_frequencies(cfg, 16000);
  REQUIRE(centers.size() == 80);
  for (std::size_t b : {12, 20, 33, 40, 57, 70}) {
    CAPTURE(b);
    const auto avg = time_average(compute_fbank(sine(centers[b], 1.0), cfg));
    CHECK(static_cast<std::size_t>(std::max_element(avg.begin(), avg.end()) - avg.begin()) == b);
  }
}

TEST_CASE("fbank is finite and mean-normalized by default") {
  Waveform w = sine(300, 1.2);
  Rng rng(4);
  for (auto& s : w.samples) s = std::clamp(s + static_cast<float>(0.3 * rng.normal()), -1.0f, 1.0f);
  const FeatureMap f = compute_fbank(w);
  for (float v : f.data.vec()) CHECK(std::isfinite(v));
  for (double m : time_average(f)) CHECK(std::abs(m) < 1e-4);
}

TEST_CASE("fbank rejects input shorter than one window") {
  Waveform w;
  w.samples.assign(399, 0.1f);
  CHECK_THROWS_AS(compute_fbank(w), InputError);
  FbankConfig bad;
  bad.hop_ms = 30.0;
  CHECK_THROWS_AS(compute_fbank(sine(100, 1.0), bad), ConfigError);
}

TEST_CASE("time mask") {
  const FeatureMap f = random_map(80, 100, 1);
  SUBCASE("zero width is the identity") { CHECK(time_mask(f, 0, 7).data.vec() == f.data.vec()); }
  SUBCASE("deterministic under a seed") { CHECK(time_mask(f, 20, 7).data.vec() == time_mask(f, 20, 7).data.vec()); }
  SUBCASE("one contiguous span, other cells bit-equal") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const FeatureMap m = time_mask(f, 20, seed);
      std::set<std::size_t> cols;
      std::size_t changed = 0;
      for (std::size_t d = 0; d < 80; ++d)
        for (std::size_t t = 0; t < 100; ++t)
          if (m.at(d, t) != f.at(d, t)) {
            ++changed;
            cols.insert(t);
          }
      CHECK(changed <= 80 * 20);
      if (!cols.empty()) CHECK(*cols.rbegin() - *cols.begin() + 1 <= 20);
    }
  }
  SUBCASE("mask fill is the per-bin mean") {
    const FeatureMap m = time_mask(f, 99, 3);
    const auto mean = time_average(f);
    for (std::size_t t = 0; t < 100; ++t)
      if (m.at(5, t) != f.at(5, t)) CHECK(m.at(5, t) == doctest::Approx(mean[5]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(time_mask(f, 100, 1), InputError);
}

TEST_CASE("speed perturbation") {
  Waveform w = sine(200, 3.0);
  CHECK(speed_perturb(w, 1.0).samples == w.samples);
  CHECK(speed_perturb(w, 0.9).samples.size() == 53333);
  CHECK(speed_perturb(w, 1.1).samples.size() == 43636);
  auto rms = [](const Waveform& x) {
    double s = 0;
    for (float v : x.samples) s += static_cast<double>(v) * v;
    return std::sqrt(s / static_cast<double>(x.samples.size()));
  };
  for (double factor : {0.9, 1.1}) CHECK(std::abs(rms(speed_perturb(w, factor)) / rms(w) - 1.0) < 0.01);
  CHECK_THROWS_AS(speed_perturb(w, 0.0), ConfigError);
  CHECK_THROWS_AS(speed_perturb(w, -1.0), ConfigError);
}

TEST_CASE("segment cropping") {
  const std::size_t l3 = FbankConfig{}.frames_for_seconds(3.0);
  SUBCASE("long input gives a 3 s window") {
    const FeatureMap f = random_map(80, 998, 2);
    const FeatureMap c = crop_segment(f, l3, 5);
    CHECK(c.frames() == 298);
    bool found = false;
    for (std::size_t s = 0; s + l3 <= f.frames() && !found; ++s) {
      bool eq = true;
      for (std::size_t t = 0; t < l3 && eq; ++t) eq = c.at(0, t) == f.at(0, s + t) && c.at(79, t) == f.at(79, s + t);
      found = eq;
    }
    CHECK(found);
  }
  SUBCASE("exact length is the identity") {
    const FeatureMap f = random_map(80, 298, 3);
    CHECK(crop_segment(f, l3, 9).data.vec() == f.data.vec());
  }
  SUBCASE("short input wrap-pads") {
    const FeatureMap f = random_map(80, 198, 4);
    const FeatureMap c = crop_segment(f, l3, 9);
    CHECK(c.frames() == 298);
    for (std::size_t d = 0; d < 80; ++d)
      for (std::size_t t = 0; t < 298; ++t) REQUIRE(c.at(d, t) == f.at(d, t % 198));
  }
}

TEST_CASE("wav round trip") {
  const Waveform w = sine(523.25, 0.25, 0.8);
  const auto path = temp_path("tone.wav");
  write_wav(path, w);
  const Waveform r = read_wav(path);
  CHECK(r.sample_rate == 16000);
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) REQUIRE(std::abs(r.samples[i] - w.samples[i]) <= 1.0f / 32767);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << "RIFF";
  CHECK_THROWS_AS(read_wav(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("feature archive round trip and failure modes") {
  FeatureMap f = random_map(80, 123, 6);
  f.id = "spk001-u03";
  f.frame_hop_s = 0.01f;
  const std::string bytes = encode_feature_archive(f);
  CHECK(bytes.substr(0, 8) == "MFAF0001");
  CHECK(bytes.size() == 8 + 4 + 4 + 4 + 4 + f.id.size() + 80 * 123 * 4);
  const FeatureMap g = decode_feature_archive(bytes);
  CHECK(g.id == f.id);
  CHECK(g.frame_hop_s == f.frame_hop_s);
  CHECK(g.data.shape() == f.data.shape());
  CHECK(std::memcmp(g.data.data(), f.data.data(), f.data.numel() * sizeof(float)) == 0);

  const auto path = temp_path("map.mfaf");
  write_feature_archive(path, f);
  CHECK(read_feature_archive(path).data.vec() == f.data.vec());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(decode_feature_archive(bytes.substr(0, bytes.size() - 1)), TruncatedFileError);
  CHECK_THROWS_AS(decode_feature_archive(bytes.substr(0, 14)), TruncatedFileError);
  std::string v2 = bytes;
  v2[7] = '2';
  CHECK_THROWS_AS(decode_feature_archive(v2), VersionMismatchError);
  CHECK_THROWS_AS(decode_feature_archive("NOTANARCHIVE"), FormatError);
}

TEST_CASE("synthetic corpus") {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.utts_per_speaker = 4;
  const SynthCorpus c = synth_corpus(cfg);
  SUBCASE("splits are disjoint and sized") {
    std::set<std::string> seen;
    std::size_t total = 0;
    for (Split s : {Split::kTrain, Split::kValid, Split::kTest, Split::kCohort}) {
      for (std::size_t i : c.speakers_in(s)) CHECK(seen.insert(c.speakers[i].id).second);
      total += c.speakers_in(s).size();
    }
    CHECK(total == 34);
    CHECK(c.speakers_in(Split::kTrain).size() == 10);
    for (const auto& sp : c.speakers) {
      CHECK(sp.f0_hz >= 90.0);
      CHECK(sp.f0_hz <= 250.0);
    }
  }
  SUBCASE("generation is bit-reproducible") {
    const SynthCorpus c2 = synth_corpus(cfg);
    const Waveform a = render_utterance(c, c.utterances[5]), b = render_utterance(c2, c2.utterances[5]);
    CHECK(a.samples == b.samples);
    CHECK(a.duration_s() >= 3.0);
    CHECK(a.duration_s() <= 6.0);
  }
  SUBCASE("20 dB SNR noise floor and amplitude range") {
    const Waveform a = render_utterance(c, c.utterances[0]);
    double ss = 0;
    for (float v : a.samples) {
      REQUIRE(std::abs(v) <= 1.0f);
      ss += static_cast<double>(v) * v;
    }
    CHECK(std::sqrt(ss / static_cast<double>(a.samples.size())) == doctest::Approx(0.1 * std::sqrt(1.01)).epsilon(0.02));
  }
  SUBCASE("same-speaker spectra are closer than cross-speaker spectra") {
    FbankConfig fc;
    fc.mean_norm = false;
    const SynthCorpus small = synth_corpus(6, 3, {2.0, 3.0}, 11);
    std::vector<std::vector<double>> avg;
    for (const auto& u : small.utterances) avg.push_back(time_average(compute_fbank(render_utterance(small, u), fc)));
    double same = 0, cross = 0;
    std::size_t ns = 0, nc = 0;
    for (std::size_t i = 0; i < avg.size(); ++i)
      for (std::size_t j = i + 1; j < avg.size(); ++j) {
        const double s = cosine(avg[i], avg[j]);
        if (small.utterances[i].speaker == small.utterances[j].speaker) {
          same += s;
          ++ns;
        } else {
          cross += s;
          ++nc;
        }
      }
    CHECK(same / ns > cross / nc);
  }
  CHECK_THROWS_AS(synth_corpus(1, 3, {3.0, 4.0}, 0), ConfigError);
}
