#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfatdnn/backbone/model.hpp"
#include "mfatdnn/error.hpp"
#include "mfatdnn/features/fbank.hpp"
#include "mfatdnn/features/synth.hpp"
#include "mfatdnn/training/aam.hpp"
#include "mfatdnn/training/optim.hpp"

namespace mfatdnn::training {

struct TrainConfig {
  std::size_t epochs = 4;
  std::size_t steps_per_epoch = 80;
  std::size_t batch_size = 16;
  double segment_s = 3.0;
  std::size_t time_mask_frames = 10;  // upper bound on the masked span per crop
  double cycle_epochs = 2.0;
  double lr_min = 1e-8;
  double lr_max = 1e-3;
  double margin = 0.2;
  double scale = 30.0;
  AdamConfig adam;
  double width = 0.125;  // toy C_E multiplier
  std::size_t mfa_channels = 16;
  std::size_t loss_window = 10;  // steps averaged for initial / final loss
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty: keep snapshots in memory only

  void validate() const;
  std::uint64_t total_steps() const { return epochs * steps_per_epoch; }
  CyclicLrSchedule schedule() const;
};

struct LabeledFeatures {
  std::vector<features::FeatureMap> maps;
  std::vector<std::size_t> labels;
};

struct TrainData {
  LabeledFeatures train;
  LabeledFeatures valid;
  std::size_t classes = 0;
};

// Renders and featurizes the corpus. Training speakers become classes;
// validation uses the corpus' validation speakers, or, when there are fewer
// than two, the last two utterances of every training speaker (held out of
// training).
TrainData prepare_train_data(const features::SynthCorpus& corpus, const features::FbankConfig& fbank = {});
// Same split rules, features taken from `featurize(utterance index)`.
using FeatureSource = std::function<features::FeatureMap(std::size_t)>;
TrainData prepare_train_data(const features::SynthCorpus& corpus, const FeatureSource& featurize);

struct EpochRecord {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;     // mean train loss over the epoch
  double val_eer = 0.0;  // fraction

  // epoch=<n> step=<n> lr=<f> loss=<f> val_eer=<f>
  std::string line() const;
};

struct TrainResult {
  std::unique_ptr<backbone::Model<float>> model;  // set by train_toy only
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::size_t best_epoch = 0;  // 1-based
  double initial_loss = 0.0;
  double final_loss = 0.0;

  std::string log() const;
};

// Raised when the loss or a gradient becomes non-finite. The model handed to
// train() is left holding the last completed epoch's parameters, which are
// also on disk as last_good.ckpt when a checkpoint directory is configured.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::uint64_t step, std::size_t last_good_epoch)
      : NumericError(what), step_(step), last_good_epoch_(last_good_epoch) {}
  std::uint64_t step() const { return step_; }
  std::size_t last_good_epoch() const { return last_good_epoch_; }

 private:
  std::uint64_t step_;
  std::size_t last_good_epoch_;
};

// Index of the smallest value; ties go to the earliest.
std::size_t select_best_epoch(std::span<const double> val_eers);

// EER over all pairs of `data` (target = same label), embeddings from full
// maps in eval mode.
double validation_eer(backbone::Model<float>& model, const LabeledFeatures& data);

using LogSink = std::function<void(const std::string&)>;

// Trains `model` in place; on return it holds the best epoch's parameters.
TrainResult train(backbone::Model<float>& model, const TrainData& data, const TrainConfig& cfg,
                  const LogSink& sink = {});

// Toy-width model of `variant` trained on `corpus`.
TrainResult train_toy(const features::SynthCorpus& corpus, backbone::ModelVariant variant, const TrainConfig& cfg,
                      const LogSink& sink = {});

// Loss and gradients of one batch (features [N, 1, D, L]); gradients are
// accumulated into the model's and the head's parameters.
template <typename T>
double batch_loss_and_grad(backbone::Model<T>& model, AamSoftmax<T>& head, const nn::Tensor<T>& batch,
                           std::span<const std::size_t> labels);

}  // namespace mfatdnn::training
