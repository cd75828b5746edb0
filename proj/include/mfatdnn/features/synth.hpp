#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mfatdnn/features/audio.hpp"

// Synthetic speaker corpus: a source-filter voice per speaker (speaker f0 and
// a 4-resonance spectral envelope) plus white noise at 20 dB SNR. Utterances
// of one speaker differ in f0 jitter, intonation, syllable rhythm and noise.
namespace mfatdnn::features {

enum class Split { kTrain, kValid, kTest, kCohort };

std::string_view split_name(Split s);

struct Resonance {
  double freq_hz;
  double bandwidth_hz;
  double gain;
};

struct SpeakerProfile {
  std::string id;
  Split split = Split::kTrain;
  double f0_hz = 120.0;
  std::array<Resonance, 4> envelope{};
  double tilt = 0.9;  // one-pole glottal low-pass coefficient
};

struct UtteranceSpec {
  std::string id;
  std::size_t speaker = 0;  // index into SynthCorpus::speakers
  double duration_s = 0.0;
  std::uint64_t seed = 0;
};

struct SynthConfig {
  std::size_t train_speakers = 10;
  std::size_t valid_speakers = 4;
  std::size_t test_speakers = 10;
  std::size_t cohort_speakers = 10;
  std::size_t utts_per_speaker = 8;
  double min_duration_s = 3.0;
  double max_duration_s = 6.0;
  int sample_rate = 16000;
  double snr_db = 20.0;
  std::uint64_t seed = 0;
};

struct SynthCorpus {
  SynthConfig config;
  std::vector<SpeakerProfile> speakers;
  std::vector<UtteranceSpec> utterances;

  std::vector<std::size_t> utterances_in(Split s) const;
  std::vector<std::size_t> speakers_in(Split s) const;
};

SynthCorpus synth_corpus(const SynthConfig& cfg);
// All speakers in the training split.
SynthCorpus synth_corpus(std::size_t n_speakers, std::size_t utts_per_speaker,
                         std::array<double, 2> duration_range_s, std::uint64_t seed);

Waveform render_utterance(const SynthCorpus& corpus, const UtteranceSpec& utt);

}  // namespace mfatdnn::features
