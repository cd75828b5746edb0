#include "mfatdnn/features/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mfatdnn/error.hpp"
#include "mfatdnn/rng.hpp"

namespace mfatdnn::features {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
    case Split::kCohort:
      return "cohort";
  }
  return "?";
}

std::vector<std::size_t> SynthCorpus::utterances_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < utterances.size(); ++i)
    if (speakers[utterances[i].speaker].split == s) out.push_back(i);
  return out;
}

std::vector<std::size_t> SynthCorpus::speakers_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < speakers.size(); ++i)
    if (speakers[i].split == s) out.push_back(i);
  return out;
}

namespace {

SpeakerProfile make_speaker(std::size_t index, Split split, Rng rng) {
  SpeakerProfile p;
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%03zu", index);
  p.id = buf;
  p.split = split;
  p.f0_hz = rng.uniform(90.0, 250.0);
  constexpr std::array<std::array<double, 2>, 4> bands{
      {{300.0, 900.0}, {900.0, 2300.0}, {2300.0, 3300.0}, {3300.0, 4800.0}}};
  for (std::size_t k = 0; k < 4; ++k)
    p.envelope[k] = {rng.uniform(bands[k][0], bands[k][1]), rng.uniform(60.0, 200.0),
                     rng.uniform(0.3, 1.0)};
  p.tilt = rng.uniform(0.85, 0.97);
  return p;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  const std::size_t total =
      cfg.train_speakers + cfg.valid_speakers + cfg.test_speakers + cfg.cohort_speakers;
  if (total < 2) throw ConfigError("a corpus needs at least 2 speakers");
  if (!(cfg.min_duration_s > 0 && cfg.max_duration_s >= cfg.min_duration_s))
    throw ConfigError("invalid duration range");
  if (cfg.utts_per_speaker == 0) throw ConfigError("utts_per_speaker must be positive");
  SynthCorpus c;
  c.config = cfg;
  const Rng root = Rng(cfg.seed).split("synth");
  const Rng spk_rng = root.split("speakers");
  const Rng utt_rng = root.split("utterances");
  const std::array<std::pair<Split, std::size_t>, 4> plan{{{Split::kTrain, cfg.train_speakers},
                                                           {Split::kValid, cfg.valid_speakers},
                                                           {Split::kTest, cfg.test_speakers},
                                                           {Split::kCohort, cfg.cohort_speakers}}};
  for (const auto& [split, count] : plan)
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t idx = c.speakers.size();
      c.speakers.push_back(make_speaker(idx, split, spk_rng.split(idx)));
    }
  for (std::size_t s = 0; s < c.speakers.size(); ++s) {
    Rng r = utt_rng.split(s);
    for (std::size_t u = 0; u < cfg.utts_per_speaker; ++u) {
      UtteranceSpec spec;
      char buf[16];
      std::snprintf(buf, sizeof buf, "-u%02zu", u);
      spec.id = c.speakers[s].id + buf;
      spec.speaker = s;
      spec.duration_s = r.uniform(cfg.min_duration_s, cfg.max_duration_s);
      spec.seed = r.next_u64();
      c.utterances.push_back(spec);
    }
  }
  return c;
}

SynthCorpus synth_corpus(std::size_t n_speakers, std::size_t utts_per_speaker,
                         std::array<double, 2> duration_range_s, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.train_speakers = n_speakers;
  cfg.valid_speakers = cfg.test_speakers = cfg.cohort_speakers = 0;
  cfg.utts_per_speaker = utts_per_speaker;
  cfg.min_duration_s = duration_range_s[0];
  cfg.max_duration_s = duration_range_s[1];
  cfg.seed = seed;
  if (n_speakers < 2) throw ConfigError("a corpus needs at least 2 speakers");
  return synth_corpus(cfg);
}

Waveform render_utterance(const SynthCorpus& corpus, const UtteranceSpec& utt) {
  const SpeakerProfile& spk = corpus.speakers.at(utt.speaker);
  const int sr = corpus.config.sample_rate;
  Rng rng(utt.seed);
  const auto n = static_cast<std::size_t>(std::llround(utt.duration_s * sr));

  const double f0 = spk.f0_hz * (1.0 + rng.uniform(-0.04, 0.04));
  const double into_rate = rng.uniform(0.2, 0.5), into_phase = rng.uniform(0.0, 2 * M_PI);
  const double syl_rate = rng.uniform(3.0, 5.0), syl_phase = rng.uniform(0.0, 2 * M_PI);

  // Two-pole resonators; per-utterance formant jitter of a few percent.
  struct Res {
    double a1, a2, b0, gain, y1 = 0, y2 = 0;
  };
  std::array<Res, 4> res{};
  for (std::size_t k = 0; k < 4; ++k) {
    const double freq = spk.envelope[k].freq_hz * (1.0 + rng.uniform(-0.03, 0.03));
    const double r = std::exp(-M_PI * spk.envelope[k].bandwidth_hz / sr);
    res[k] = {2.0 * r * std::cos(2.0 * M_PI * freq / sr), -r * r, 1.0 - r, spk.envelope[k].gain};
  }

  std::vector<double> voiced(n);
  double phase = 0.0, glottal = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double f = f0 * (1.0 + 0.05 * std::sin(2 * M_PI * into_rate * t + into_phase));
    phase += f / sr;
    double src = 0.02 * rng.normal();
    if (phase >= 1.0) {
      phase -= 1.0;
      src += 1.0;
    }
    glottal = (1.0 - spk.tilt) * src + spk.tilt * glottal;
    double y = 0.0;
    for (auto& rz : res) {
      const double out = rz.b0 * glottal + rz.a1 * rz.y1 + rz.a2 * rz.y2;
      rz.y2 = rz.y1;
      rz.y1 = out;
      y += rz.gain * out;
    }
    const double syl = 0.5 - 0.5 * std::cos(2 * M_PI * syl_rate * t + syl_phase);
    voiced[i] = y * (0.2 + 0.8 * syl);
  }
  double ss = 0.0;
  for (double v : voiced) ss += v * v;
  const double rms = std::sqrt(ss / std::max<std::size_t>(n, 1));
  const double target = 0.1;
  const double gain = rms > 0 ? target / rms : 0.0;
  const double noise_rms = target * std::pow(10.0, -corpus.config.snr_db / 20.0);

  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = voiced[i] * gain + noise_rms * rng.normal();
    w.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return w;
}

}  // namespace mfatdnn::features
