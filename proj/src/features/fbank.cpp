#include "mfatdnn/features/fbank.hpp"

#include <cmath>
#include <complex>

#include "mfatdnn/error.hpp"

namespace mfatdnn::features {

namespace {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double fmax_of(const FbankConfig& cfg, int sample_rate) {
  return cfg.mel_fmax > 0.0 ? cfg.mel_fmax : sample_rate / 2.0;
}

}  // namespace

double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

void FbankConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (n_mels <= 0) throw ConfigError("n_mels must be positive");
  if (!(window_ms > hop_ms && hop_ms > 0)) throw ConfigError("need window_ms > hop_ms > 0");
  if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
    throw ConfigError("fft_size must be a power of two");
  if (window_samples(sample_rate) > static_cast<std::size_t>(fft_size))
    throw ConfigError("window longer than fft_size");
  if (!(log_floor > 0)) throw ConfigError("log_floor must be positive");
  if (!(mel_fmin >= 0 && mel_fmin < fmax_of(*this, sample_rate)))
    throw ConfigError("mel range is empty");
}

std::size_t FbankConfig::window_samples(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(window_ms * 1e-3 * sample_rate));
}

std::size_t FbankConfig::hop_samples(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(hop_ms * 1e-3 * sample_rate));
}

std::size_t FbankConfig::frames_for_samples(std::size_t n, int sample_rate) const {
  const std::size_t win = window_samples(sample_rate), hop = hop_samples(sample_rate);
  if (n < win) return 0;
  return (n - win) / hop + 1;
}

std::size_t FbankConfig::frames_for_seconds(double seconds, int sample_rate) const {
  return frames_for_samples(static_cast<std::size_t>(std::lround(seconds * sample_rate)), sample_rate);
}

std::vector<double> mel_center_frequencies(const FbankConfig& cfg, int sample_rate) {
  const double lo = hz_to_mel(cfg.mel_fmin), hi = hz_to_mel(fmax_of(cfg, sample_rate));
  const double step = (hi - lo) / (cfg.n_mels + 1);
  std::vector<double> c(static_cast<std::size_t>(cfg.n_mels));
  for (int m = 0; m < cfg.n_mels; ++m) c[m] = mel_to_hz(lo + (m + 1) * step);
  return c;
}

FeatureMap compute_fbank(const Waveform& w, const FbankConfig& cfg, std::string id) {
  cfg.validate(w.sample_rate);
  const int sr = w.sample_rate;
  const std::size_t win = cfg.window_samples(sr), hop = cfg.hop_samples(sr);
  const std::size_t frames = cfg.frames_for_samples(w.samples.size(), sr);
  if (frames == 0)
    throw InputError("utterance '" + id + "' is shorter than one analysis window (" +
                     std::to_string(w.samples.size()) + " < " + std::to_string(win) + " samples)");
  const std::size_t n_fft = static_cast<std::size_t>(cfg.fft_size), n_bins = n_fft / 2 + 1;
  const std::size_t n_mels = static_cast<std::size_t>(cfg.n_mels);

  // Triangular filters on the mel scale, evaluated at FFT bin frequencies.
  const double mlo = hz_to_mel(cfg.mel_fmin), mhi = hz_to_mel(fmax_of(cfg, sr));
  const double mstep = (mhi - mlo) / static_cast<double>(n_mels + 1);
  std::vector<double> weights(n_mels * n_bins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = mlo + m * mstep, center = left + mstep, right = center + mstep;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sr / static_cast<double>(n_fft));
      double v = 0.0;
      if (mel > left && mel <= center) v = (mel - left) / mstep;
      else if (mel > center && mel < right) v = (right - mel) / mstep;
      weights[m * n_bins + k] = v;
    }
  }
  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(win - 1));

  FeatureMap out;
  out.data = nn::Tensor<float>({1, n_mels, frames});
  out.frame_hop_s = static_cast<float>(hop) / static_cast<float>(sr);
  out.id = std::move(id);

  std::vector<std::complex<double>> buf(n_fft);
  std::vector<double> frame(win), power(n_bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const float* s = w.samples.data() + t * hop;
    for (std::size_t i = 0; i < win; ++i) frame[i] = s[i];
    for (std::size_t i = win; i-- > 1;) frame[i] -= cfg.preemphasis * frame[i - 1];
    frame[0] -= cfg.preemphasis * frame[0];
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < win; ++i) buf[i] = frame[i] * window[i];
    fft(buf);
    for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < n_mels; ++m) {
      double e = 0.0;
      const double* wm = weights.data() + m * n_bins;
      for (std::size_t k = 0; k < n_bins; ++k) e += wm[k] * power[k];
      out.at(m, t) = static_cast<float>(std::log(e + cfg.log_floor));
    }
  }
  if (cfg.mean_norm) {
    for (std::size_t m = 0; m < n_mels; ++m) {
      double mean = 0.0;
      for (std::size_t t = 0; t < frames; ++t) mean += out.at(m, t);
      mean /= static_cast<double>(frames);
      for (std::size_t t = 0; t < frames; ++t)
        out.at(m, t) = static_cast<float>(out.at(m, t) - mean);
    }
  }
  return out;
}

}  // namespace mfatdnn::features
