#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mfatdnn/features/fbank.hpp"
#include "mfatdnn/rng.hpp"

namespace mfatdnn::features {

// Replaces one contiguous span of at most `max_frames` frames with the per-bin
// mean of the map. max_frames == 0 is the identity.
FeatureMap time_mask(const FeatureMap& f, std::size_t max_frames, Rng& rng);
FeatureMap time_mask(const FeatureMap& f, std::size_t max_frames, std::uint64_t seed);

// A uniformly random window of exactly `frames` frames; shorter inputs are
// wrap-padded by repeating from the start.
FeatureMap crop_segment(const FeatureMap& f, std::size_t frames, Rng& rng);
FeatureMap crop_segment(const FeatureMap& f, std::size_t frames, std::uint64_t seed);

// Feature-domain augmentation stage. Reverberation and additive-noise stages
// can be plugged in here alongside the built-in time mask.
class Augmentation {
 public:
  virtual ~Augmentation() = default;
  virtual FeatureMap apply(const FeatureMap& f, Rng& rng) const = 0;
};

class TimeMaskAugmentation final : public Augmentation {
 public:
  explicit TimeMaskAugmentation(std::size_t max_frames) : max_frames_(max_frames) {}
  FeatureMap apply(const FeatureMap& f, Rng& rng) const override {
    return time_mask(f, max_frames_, rng);
  }

 private:
  std::size_t max_frames_;
};

using AugmentationChain = std::vector<std::shared_ptr<const Augmentation>>;

FeatureMap apply_chain(const AugmentationChain& chain, FeatureMap f, Rng& rng);

}  // namespace mfatdnn::features
