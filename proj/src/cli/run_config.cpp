#include "mfatdnn/cli/run_config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

#include "mfatdnn/error.hpp"

namespace mfatdnn::cli {

using nlohmann::json;

namespace {

// Reads known keys of one JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config '" + path_ + "' must be an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    const std::string where = path_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError("config '" + where + "' must be a boolean");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned()) throw ConfigError("config '" + where + "' must be a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError("config '" + where + "' must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("config '" + where + "' must be a number");
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config '" + where + "': " + e.what());
    }
  }

  ObjectReader child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    const auto it = j_.find(key);
    return ObjectReader(it == j_.end() ? empty : *it, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + path_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  synth.seed = s;
  train.seed = s;
}

void RunConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("run name must be a plain non-empty name");
  if (synth.train_speakers < 2) throw ConfigError("synth.train_speakers must be at least 2");
  if (synth.test_speakers < 2) throw ConfigError("synth.test_speakers must be at least 2 to form trials");
  if (synth.utts_per_speaker < 2) throw ConfigError("synth.utts_per_speaker must be at least 2");
  if (!(synth.min_duration_s > 0 && synth.max_duration_s >= synth.min_duration_s))
    throw ConfigError("synth durations must satisfy 0 < min <= max");
  fbank.validate(synth.sample_rate);
  train.validate();
  if (eval.snorm && synth.cohort_speakers == 0) throw ConfigError("eval.snorm needs synth.cohort_speakers > 0");
  for (double d : eval.durations)
    if (!(d >= 4.0 && d <= 10.0)) throw ConfigError("eval.durations must lie in [4, 10] seconds");
  if (!(eval.dcf.p_target > 0 && eval.dcf.p_target < 1 && eval.dcf.c_fa > 0 && eval.dcf.c_miss > 0))
    throw ConfigError("eval DCF parameters out of range");
  model_config().validate();
}

backbone::ModelConfig RunConfig::model_config() const {
  backbone::ModelConfig m = backbone::ModelConfig::toy(variant, train.width, train.mfa_channels);
  m.mel_bins = static_cast<std::size_t>(fbank.n_mels);
  m.mfa.mel_bins = m.mel_bins;
  return m;
}

json RunConfig::to_json() const {
  return {
      {"name", name},
      {"seed", seed},
      {"variant", std::string(backbone::variant_name(variant))},
      {"synth",
       {{"train_speakers", synth.train_speakers},
        {"valid_speakers", synth.valid_speakers},
        {"test_speakers", synth.test_speakers},
        {"cohort_speakers", synth.cohort_speakers},
        {"utts_per_speaker", synth.utts_per_speaker},
        {"min_duration_s", synth.min_duration_s},
        {"max_duration_s", synth.max_duration_s},
        {"snr_db", synth.snr_db}}},
      {"features",
       {{"n_mels", fbank.n_mels},
        {"window_ms", fbank.window_ms},
        {"hop_ms", fbank.hop_ms},
        {"mean_norm", fbank.mean_norm}}},
      {"train",
       {{"epochs", train.epochs},
        {"steps_per_epoch", train.steps_per_epoch},
        {"batch_size", train.batch_size},
        {"segment_s", train.segment_s},
        {"time_mask_frames", train.time_mask_frames},
        {"cycle_epochs", train.cycle_epochs},
        {"lr_min", train.lr_min},
        {"lr_max", train.lr_max},
        {"margin", train.margin},
        {"scale", train.scale},
        {"weight_decay", train.adam.weight_decay},
        {"width", train.width},
        {"mfa_channels", train.mfa_channels},
        {"loss_window", train.loss_window}}},
      {"eval",
       {{"snorm", eval.snorm},
        {"top_k", eval.top_k},
        {"p_target", eval.dcf.p_target},
        {"c_fa", eval.dcf.c_fa},
        {"c_miss", eval.dcf.c_miss},
        {"durations", eval.durations}}},
  };
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  ObjectReader root(j, "config");
  root.read("name", c.name);
  std::uint64_t seed = c.seed;
  root.read("seed", seed);
  c.apply_seed(seed);
  std::string variant(backbone::variant_name(c.variant));
  root.read("variant", variant);
  c.variant = backbone::parse_variant(variant);

  auto s = root.child("synth");
  s.read("train_speakers", c.synth.train_speakers);
  s.read("valid_speakers", c.synth.valid_speakers);
  s.read("test_speakers", c.synth.test_speakers);
  s.read("cohort_speakers", c.synth.cohort_speakers);
  s.read("utts_per_speaker", c.synth.utts_per_speaker);
  s.read("min_duration_s", c.synth.min_duration_s);
  s.read("max_duration_s", c.synth.max_duration_s);
  s.read("snr_db", c.synth.snr_db);
  s.finish();

  auto f = root.child("features");
  f.read("n_mels", c.fbank.n_mels);
  f.read("window_ms", c.fbank.window_ms);
  f.read("hop_ms", c.fbank.hop_ms);
  f.read("mean_norm", c.fbank.mean_norm);
  f.finish();

  auto t = root.child("train");
  t.read("epochs", c.train.epochs);
  t.read("steps_per_epoch", c.train.steps_per_epoch);
  t.read("batch_size", c.train.batch_size);
  t.read("segment_s", c.train.segment_s);
  t.read("time_mask_frames", c.train.time_mask_frames);
  t.read("cycle_epochs", c.train.cycle_epochs);
  t.read("lr_min", c.train.lr_min);
  t.read("lr_max", c.train.lr_max);
  t.read("margin", c.train.margin);
  t.read("scale", c.train.scale);
  t.read("weight_decay", c.train.adam.weight_decay);
  t.read("width", c.train.width);
  t.read("mfa_channels", c.train.mfa_channels);
  t.read("loss_window", c.train.loss_window);
  t.finish();

  auto e = root.child("eval");
  e.read("snorm", c.eval.snorm);
  e.read("top_k", c.eval.top_k);
  e.read("p_target", c.eval.dcf.p_target);
  e.read("c_fa", c.eval.dcf.c_fa);
  e.read("c_miss", c.eval.dcf.c_miss);
  e.read("durations", c.eval.durations);
  e.finish();

  root.finish();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace mfatdnn::cli
