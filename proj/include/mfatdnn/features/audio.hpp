#pragma once

#include <filesystem>
#include <vector>

namespace mfatdnn::features {

struct Waveform {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// 16-bit PCM mono WAV.
void write_wav(const std::filesystem::path& path, const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);

// Resamples the sample index axis by linear interpolation; output length is
// round(len / factor). factor > 1 speeds up (shorter output).
Waveform speed_perturb(const Waveform& w, double factor);

}  // namespace mfatdnn::features
