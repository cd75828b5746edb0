#pragma once

#include <string>
#include <vector>

#include "mfatdnn/features/audio.hpp"
#include "mfatdnn/nn/tensor.hpp"

namespace mfatdnn::features {

struct FbankConfig {
  int n_mels = 80;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  double preemphasis = 0.97;
  double mel_fmin = 20.0;
  double mel_fmax = 0.0;  // 0 -> sample_rate / 2
  double log_floor = 1e-6;
  // Subtract the per-bin mean over time.
  bool mean_norm = true;

  void validate(int sample_rate) const;
  std::size_t window_samples(int sample_rate) const;
  std::size_t hop_samples(int sample_rate) const;
  // Frame count for a waveform of `n` samples (0 if shorter than one window).
  std::size_t frames_for_samples(std::size_t n, int sample_rate) const;
  std::size_t frames_for_seconds(double seconds, int sample_rate = 16000) const;
};

// 1 x D x L log-mel map.
struct FeatureMap {
  nn::Tensor<float> data;  // [1, D, L]
  float frame_hop_s = 0.01f;
  std::string id;

  std::size_t bins() const { return data.dim(1); }
  std::size_t frames() const { return data.dim(2); }
  float& at(std::size_t d, std::size_t t) { return data.at(0, d, t); }
  float at(std::size_t d, std::size_t t) const { return data.at(0, d, t); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequency (Hz) of each triangular mel filter.
std::vector<double> mel_center_frequencies(const FbankConfig& cfg, int sample_rate);

FeatureMap compute_fbank(const Waveform& w, const FbankConfig& cfg = {}, std::string id = {});

}  // namespace mfatdnn::features
