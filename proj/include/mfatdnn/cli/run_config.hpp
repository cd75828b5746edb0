#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfatdnn/backbone/model.hpp"
#include "mfatdnn/eval/metrics.hpp"
#include "mfatdnn/features/fbank.hpp"
#include "mfatdnn/features/synth.hpp"
#include "mfatdnn/training/trainer.hpp"

// Declarative run configuration. JSON document, every key optional with the
// defaults below; unknown keys are rejected with their full path.
//
//   { "name", "seed", "variant",
//     "synth":    { train_speakers, valid_speakers, test_speakers, cohort_speakers,
//                   utts_per_speaker, min_duration_s, max_duration_s, snr_db },
//     "features": { n_mels, window_ms, hop_ms, mean_norm },
//     "train":    { epochs, steps_per_epoch, batch_size, segment_s, time_mask_frames,
//                   cycle_epochs, lr_min, lr_max, margin, scale, weight_decay,
//                   width, mfa_channels, loss_window },
//     "eval":     { snorm, top_k, p_target, c_fa, c_miss, durations } }
namespace mfatdnn::cli {

struct EvalSettings {
  bool snorm = true;
  std::size_t top_k = 0;  // 0: full cohort
  eval::DcfParams dcf;
  std::vector<double> durations{4, 5, 6, 7, 8, 9, 10};
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 7;
  backbone::ModelVariant variant = backbone::ModelVariant::kMfaStandard;
  features::SynthConfig synth;
  features::FbankConfig fbank;
  training::TrainConfig train;
  EvalSettings eval;

  // Seeds every stage from the top-level seed.
  void apply_seed(std::uint64_t s);
  void validate() const;
  // Toy-width model of `variant` over `fbank.n_mels` bins.
  backbone::ModelConfig model_config() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace mfatdnn::cli
