#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"
#include "mfatdnn/backbone/model.hpp"

// Checkpoint layout ("MFAC1"):
//   u32 LE manifest length | UTF-8 JSON manifest | f32 LE blobs in manifest order
// The manifest carries the format version, variant, full model config,
// training step and the parameter inventory (name, shape, buffer flag).
namespace mfatdnn::backbone {

inline constexpr std::string_view kCheckpointFormat = "MFAC1";

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

struct CheckpointInfo {
  ModelConfig config;
  std::uint64_t step = 0;
};

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path,
                     std::uint64_t step = 0);

// Builds a fresh model from the manifest. Throws TruncatedFileError,
// VersionMismatchError or ShapeMismatchError; never returns a partial model.
std::unique_ptr<Model<float>> load_checkpoint(const std::filesystem::path& path,
                                              CheckpointInfo* info = nullptr);

// Loads into an existing model; the manifest inventory must match the target's
// exactly. The target is untouched on failure.
void load_checkpoint_into(Model<float>& model, const std::filesystem::path& path,
                          CheckpointInfo* info = nullptr);

}  // namespace mfatdnn::backbone
