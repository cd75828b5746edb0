#include "mfatdnn/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mfatdnn/backbone/checkpoint.hpp"
#include "mfatdnn/eval/metrics.hpp"
#include "mfatdnn/eval/scoring.hpp"
#include "mfatdnn/features/augment.hpp"

namespace mfatdnn::training {

using backbone::Model;
using features::FeatureMap;

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2 (batchnorm)");
  if (epochs == 0 || steps_per_epoch == 0) throw ConfigError("epochs and steps_per_epoch must be positive");
  if (!(segment_s > 0)) throw ConfigError("segment length must be positive");
  if (!(cycle_epochs > 0)) throw ConfigError("cycle length must be positive");
  if (!(width > 0 && width <= 1)) throw ConfigError("width multiplier must lie in (0, 1]");
  if (loss_window == 0) throw ConfigError("loss_window must be positive");
  schedule().validate();
}

CyclicLrSchedule TrainConfig::schedule() const {
  const auto cycle = static_cast<std::uint64_t>(std::llround(cycle_epochs * static_cast<double>(steps_per_epoch)));
  return {lr_min, lr_max, std::max<std::uint64_t>(cycle, 1)};
}

std::string EpochRecord::line() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch=%zu step=%llu lr=%.6e loss=%.6f val_eer=%.6f", epoch,
                static_cast<unsigned long long>(step), lr, loss, val_eer);
  return buf;
}

std::string TrainResult::log() const {
  std::string s;
  for (const auto& e : epochs) s += e.line() + "\n";
  return s;
}

TrainData prepare_train_data(const features::SynthCorpus& corpus, const features::FbankConfig& fbank) {
  return prepare_train_data(corpus, [&](std::size_t u) {
    const auto& spec = corpus.utterances[u];
    return features::compute_fbank(render_utterance(corpus, spec), fbank, spec.id);
  });
}

TrainData prepare_train_data(const features::SynthCorpus& corpus, const FeatureSource& featurize) {
  TrainData d;
  const auto train_spk = corpus.speakers_in(features::Split::kTrain);
  const auto valid_spk = corpus.speakers_in(features::Split::kValid);
  if (train_spk.size() < 2) throw ConfigError("training needs at least 2 training speakers");
  std::vector<std::size_t> label_of(corpus.speakers.size(), 0);
  for (std::size_t i = 0; i < train_spk.size(); ++i) label_of[train_spk[i]] = i;
  d.classes = train_spk.size();

  const bool hold_out = valid_spk.size() < 2;
  // Hold-out mode keeps back the last two utterances of every training
  // speaker so that validation has target pairs.
  std::vector<std::size_t> seen(corpus.speakers.size(), 0), total(corpus.speakers.size(), 0);
  for (const auto& u : corpus.utterances) ++total[u.speaker];
  if (hold_out)
    for (std::size_t s : train_spk)
      if (total[s] < 3) throw ConfigError("validation hold-out needs at least 3 utterances per training speaker");

  for (std::size_t u = 0; u < corpus.utterances.size(); ++u) {
    const auto& spec = corpus.utterances[u];
    const auto split = corpus.speakers[spec.speaker].split;
    const bool is_train = split == features::Split::kTrain;
    const bool to_valid =
        hold_out ? (is_train && seen[spec.speaker]++ + 2 >= total[spec.speaker]) : split == features::Split::kValid;
    if (!is_train && !to_valid) continue;
    FeatureMap f = featurize(u);
    if (to_valid) {
      d.valid.labels.push_back(spec.speaker);
      d.valid.maps.push_back(std::move(f));
    } else {
      d.train.labels.push_back(label_of[spec.speaker]);
      d.train.maps.push_back(std::move(f));
    }
  }
  return d;
}

std::size_t select_best_epoch(std::span<const double> val_eers) {
  if (val_eers.empty()) throw InputError("no epochs to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_eers.size(); ++i)
    if (val_eers[i] < val_eers[best]) best = i;
  return best;
}

double validation_eer(Model<float>& model, const LabeledFeatures& data) {
  if (data.maps.size() != data.labels.size()) throw ShapeError("one label per validation map required");
  std::vector<std::vector<float>> emb;
  emb.reserve(data.maps.size());
  for (const auto& f : data.maps) emb.push_back(backbone::embed(model, f.data));
  std::vector<double> scores;
  std::vector<char> target;
  for (std::size_t i = 0; i < emb.size(); ++i)
    for (std::size_t j = i + 1; j < emb.size(); ++j) {
      scores.push_back(eval::cosine_score(emb[i], emb[j]));
      target.push_back(data.labels[i] == data.labels[j]);
    }
  auto flags = std::make_unique<bool[]>(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) flags[i] = target[i];
  return eval::compute_eer(scores, std::span<const bool>(flags.get(), target.size()));
}

template <typename T>
double batch_loss_and_grad(Model<T>& model, AamSoftmax<T>& head, const nn::Tensor<T>& batch,
                           std::span<const std::size_t> labels) {
  const nn::Tensor<T> emb = model.forward(batch, nn::Mode::kTrain);
  const double loss = head.forward(emb, labels);
  model.backward(head.backward());
  return loss;
}

template double batch_loss_and_grad<float>(Model<float>&, AamSoftmax<float>&, const nn::Tensor<float>&,
                                           std::span<const std::size_t>);
template double batch_loss_and_grad<double>(Model<double>&, AamSoftmax<double>&, const nn::Tensor<double>&,
                                            std::span<const std::size_t>);

namespace {

using Snapshot = std::vector<nn::Tensor<float>>;

Snapshot snapshot(const nn::ParamStore<float>& store) {
  Snapshot s;
  for (const auto& e : store) s.push_back(e.param->value);
  return s;
}

void restore(const nn::ParamStore<float>& store, const Snapshot& s) {
  std::size_t i = 0;
  for (const auto& e : store) e.param->value = s[i++];
}

double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end),
                         0.0) /
         static_cast<double>(end - begin);
}

}  // namespace

TrainResult train(Model<float>& model_ref, const TrainData& data, const TrainConfig& cfg, const LogSink& sink) {
  cfg.validate();
  Model<float>* model = &model_ref;
  if (data.train.maps.empty() || data.classes < 2) throw ConfigError("training needs at least 2 speakers");
  if (data.valid.maps.size() < 2) throw ConfigError("validation needs at least 2 utterances");

  const Rng root = Rng(cfg.seed).split("train");
  model->init(root.split("model"));
  AamSoftmax<float> head(model->config().backbone.embed_dim, {cfg.margin, cfg.scale, data.classes});
  nn::ParamStore<float> all;
  for (const auto& e : model->params()) all.add(e.name, *e.param);
  head.collect(all, "head");
  {
    nn::ParamStore<float> head_only;
    head.collect(head_only, "head");
    nn::init_params(head_only, root.split("head"));
  }
  Adam<float> adam(all, cfg.adam);
  const CyclicLrSchedule sched = cfg.schedule();

  const std::size_t bins = data.train.maps.front().bins();
  const std::size_t frames = features::FbankConfig{}.frames_for_seconds(cfg.segment_s);
  const features::TimeMaskAugmentation mask(cfg.time_mask_frames);
  if (!cfg.checkpoint_dir.empty()) std::filesystem::create_directories(cfg.checkpoint_dir);

  TrainResult res;
  Snapshot last_good = snapshot(model->params()), best;
  std::vector<double> val_eers;
  std::uint64_t step = 0;
  double lr = 0.0;
  std::vector<std::size_t> labels(cfg.batch_size);
  nn::Tensor<float> batch({cfg.batch_size, 1, bins, frames});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t k = 0; k < cfg.steps_per_epoch; ++k, ++step) {
      Rng rng = root.split("batch").split(step);
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const std::size_t u = rng.below(data.train.maps.size());
        labels[b] = data.train.labels[u];
        FeatureMap crop = features::crop_segment(data.train.maps[u], frames, rng);
        if (cfg.time_mask_frames > 0) crop = mask.apply(crop, rng);
        std::copy(crop.data.vec().begin(), crop.data.vec().end(), batch.data() + b * bins * frames);
      }
      lr = cyclical_lr(step, sched);
      all.zero_grad();
      double loss = 0.0;
      try {
        loss = batch_loss_and_grad(*model, head, batch, labels);
        if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
        adam.step(lr);
      } catch (const NumericError& e) {
        restore(model->params(), last_good);
        throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(step) + "; parameters of epoch " +
                                  std::to_string(epoch - 1) + " retained",
                              step, epoch - 1);
      }
      res.step_losses.push_back(loss);
      epoch_loss += loss;
    }
    EpochRecord rec{epoch, step, lr, epoch_loss / static_cast<double>(cfg.steps_per_epoch),
                    validation_eer(*model, data.valid)};
    res.epochs.push_back(rec);
    val_eers.push_back(rec.val_eer);
    last_good = snapshot(model->params());
    if (select_best_epoch(val_eers) == epoch - 1) best = last_good;
    if (!cfg.checkpoint_dir.empty()) {
      backbone::save_checkpoint(*model, cfg.checkpoint_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"), step);
      backbone::save_checkpoint(*model, cfg.checkpoint_dir / "last_good.ckpt", step);
    }
    if (sink) sink(rec.line());
  }

  res.best_epoch = select_best_epoch(val_eers) + 1;
  restore(model->params(), best);
  if (!cfg.checkpoint_dir.empty())
    backbone::save_checkpoint(*model, cfg.checkpoint_dir / "best.ckpt", res.epochs[res.best_epoch - 1].step);
  const std::size_t w = std::min(cfg.loss_window, res.step_losses.size());
  res.initial_loss = window_mean(res.step_losses, 0, w);
  res.final_loss = window_mean(res.step_losses, res.step_losses.size() - w, res.step_losses.size());
  return res;
}

TrainResult train_toy(const features::SynthCorpus& corpus, backbone::ModelVariant variant, const TrainConfig& cfg,
                      const LogSink& sink) {
  cfg.validate();
  const TrainData data = prepare_train_data(corpus);
  auto model = std::make_unique<Model<float>>(backbone::ModelConfig::toy(variant, cfg.width, cfg.mfa_channels));
  TrainResult res = train(*model, data, cfg, sink);
  res.model = std::move(model);
  return res;
}

}  // namespace mfatdnn::training
