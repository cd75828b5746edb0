#include "mfatdnn/features/augment.hpp"

#include "mfatdnn/error.hpp"

namespace mfatdnn::features {

FeatureMap time_mask(const FeatureMap& f, std::size_t max_frames, Rng& rng) {
  if (max_frames == 0) return f;
  const std::size_t frames = f.frames(), bins = f.bins();
  if (max_frames >= frames)
    throw InputError("time mask of up to " + std::to_string(max_frames) + " frames needs a map longer than " +
                     std::to_string(frames) + " frames");
  const std::size_t width = rng.below(max_frames + 1);
  const std::size_t start = rng.below(frames - width + 1);
  FeatureMap out = f;
  for (std::size_t d = 0; d < bins; ++d) {
    double mean = 0.0;
    for (std::size_t t = 0; t < frames; ++t) mean += f.at(d, t);
    const auto fill = static_cast<float>(mean / static_cast<double>(frames));
    for (std::size_t t = start; t < start + width; ++t) out.at(d, t) = fill;
  }
  return out;
}

FeatureMap time_mask(const FeatureMap& f, std::size_t max_frames, std::uint64_t seed) {
  Rng rng(seed);
  return time_mask(f, max_frames, rng);
}

FeatureMap crop_segment(const FeatureMap& f, std::size_t frames, Rng& rng) {
  if (frames == 0) throw ConfigError("crop length must be positive");
  const std::size_t src = f.frames(), bins = f.bins();
  if (src == 0) throw InputError("cannot crop an empty feature map");
  FeatureMap out;
  out.frame_hop_s = f.frame_hop_s;
  out.id = f.id;
  out.data = nn::Tensor<float>({1, bins, frames});
  const std::size_t start = src >= frames ? rng.below(src - frames + 1) : 0;
  for (std::size_t d = 0; d < bins; ++d)
    for (std::size_t t = 0; t < frames; ++t)
      out.at(d, t) = src >= frames ? f.at(d, start + t) : f.at(d, t % src);
  return out;
}

FeatureMap crop_segment(const FeatureMap& f, std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  return crop_segment(f, frames, rng);
}

FeatureMap apply_chain(const AugmentationChain& chain, FeatureMap f, Rng& rng) {
  for (const auto& stage : chain) f = stage->apply(f, rng);
  return f;
}

}  // namespace mfatdnn::features
