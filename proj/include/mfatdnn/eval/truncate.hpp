#pragma once

#include <string>
#include <vector>

#include "mfatdnn/eval/trials.hpp"
#include "mfatdnn/features/audio.hpp"

namespace mfatdnn::eval {

struct Utterance {
  std::string id;
  features::Waveform wave;
};

inline constexpr double kMinTruncation = 4.0;
inline constexpr double kMaxTruncation = 10.0;

// First round(max_s * sr) samples of a longer waveform; shorter ones are
// returned unchanged.
features::Waveform truncate_waveform(const features::Waveform& w, double max_s);

struct TruncatedSet {
  std::vector<Utterance> utterances;
  TrialList trials;
};

// max_s must lie in [4, 10] seconds. Trials are passed through untouched.
TruncatedSet truncate_testset(const std::vector<Utterance>& utts, const TrialList& trials, double max_s);

}  // namespace mfatdnn::eval
