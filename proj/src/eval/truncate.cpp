#include "mfatdnn/eval/truncate.hpp"

#include <cmath>

#include "mfatdnn/error.hpp"

namespace mfatdnn::eval {

features::Waveform truncate_waveform(const features::Waveform& w, double max_s) {
  if (!(max_s > 0)) throw ConfigError("truncation length must be positive");
  const auto keep = static_cast<std::size_t>(std::llround(max_s * w.sample_rate));
  if (w.samples.size() <= keep) return w;
  features::Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin(), w.samples.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

TruncatedSet truncate_testset(const std::vector<Utterance>& utts, const TrialList& trials, double max_s) {
  if (!(max_s >= kMinTruncation && max_s <= kMaxTruncation))
    throw ConfigError("maximum duration must lie in [4, 10] seconds, got " + std::to_string(max_s));
  TruncatedSet out;
  out.trials = trials;
  out.utterances.reserve(utts.size());
  for (const auto& u : utts) out.utterances.push_back({u.id, truncate_waveform(u.wave, max_s)});
  return out;
}

}  // namespace mfatdnn::eval
