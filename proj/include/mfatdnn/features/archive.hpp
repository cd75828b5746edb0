#pragma once

#include <filesystem>
#include <string>

#include "mfatdnn/features/fbank.hpp"

// "MFAF" feature archive, all integers and floats little-endian:
//   "MFAF0001" | u32 D | u32 L | f32 hop seconds | u32 id length | UTF-8 id |
//   D*L f32 values, frequency-major (bin d, frame t at d*L + t)
namespace mfatdnn::features {

std::string encode_feature_archive(const FeatureMap& f);
FeatureMap decode_feature_archive(const std::string& bytes);

void write_feature_archive(const std::filesystem::path& path, const FeatureMap& f);
FeatureMap read_feature_archive(const std::filesystem::path& path);

}  // namespace mfatdnn::features
