#include "mfatdnn/cli/commands.hpp"

#include <cstdio>

#include "json.hpp"
#include "mfatdnn/backbone/checkpoint.hpp"
#include "mfatdnn/error.hpp"
#include "mfatdnn/eval/scoring.hpp"
#include "mfatdnn/eval/truncate.hpp"
#include "mfatdnn/features/archive.hpp"
#include "mfatdnn/features/audio.hpp"
#include "mfatdnn/features/fbank.hpp"
#include "mfatdnn/training/trainer.hpp"

namespace mfatdnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using features::Split;

namespace {

fs::path wav_dir(const RunDir& run, const Condition& cond) {
  return cond.max_s ? run.corpus() / cond.name() / "wav" : run.corpus() / "wav";
}

fs::path trials_path(const RunDir& run, const Condition& cond) {
  return cond.max_s ? run.corpus() / cond.name() / "trials.txt" : run.corpus() / "trials.txt";
}

fs::path feature_path(const RunDir& run, const Condition& cond, const std::string& id) {
  return run.features() / cond.name() / (id + ".mfaf");
}

fs::path embeddings_path(const RunDir& run, const std::string& name) {
  return run.scores() / ("embeddings_" + name + ".json");
}

fs::path require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw InputError("missing " + p.string() + " (run '" + producer + "' first)");
  return p;
}

json manifest_json(const features::SynthCorpus& c) {
  json speakers = json::array(), utts = json::array();
  for (const auto& s : c.speakers) speakers.push_back({{"id", s.id}, {"split", std::string(features::split_name(s.split))}});
  for (const auto& u : c.utterances)
    utts.push_back({{"id", u.id},
                    {"speaker", c.speakers[u.speaker].id},
                    {"split", std::string(features::split_name(c.speakers[u.speaker].split))},
                    {"duration_s", u.duration_s}});
  return {{"seed", c.config.seed}, {"sample_rate", c.config.sample_rate}, {"speakers", speakers}, {"utterances", utts}};
}

std::vector<std::size_t> test_utterances(const features::SynthCorpus& c) { return c.utterances_in(Split::kTest); }

void write_embeddings(const fs::path& path, const std::string& condition, const eval::EmbeddingTable& table) {
  json e = json::object();
  for (const auto& [id, v] : table) e[id] = v;
  write_text_file(path, json{{"condition", condition}, {"embeddings", e}}.dump(1) + "\n");
}

eval::EmbeddingTable read_embeddings(const fs::path& path) {
  try {
    const json j = json::parse(read_text_file(path));
    eval::EmbeddingTable t;
    for (const auto& [id, v] : j.at("embeddings").items()) t[id] = v.get<std::vector<float>>();
    return t;
  } catch (const json::exception& e) {
    throw FormatError("embedding file " + path.string() + " is malformed: " + e.what());
  }
}

std::unique_ptr<backbone::Model<float>> load_trained(const RunConfig& cfg, const RunDir& run) {
  const fs::path ckpt = require(run.checkpoints() / "best.ckpt", "train");
  auto model = std::make_unique<backbone::Model<float>>(cfg.model_config());
  backbone::load_checkpoint_into(*model, ckpt);
  return model;
}

}  // namespace

std::string Condition::name() const {
  if (!max_s) return "full";
  char buf[32];
  std::snprintf(buf, sizeof buf, "max%gs", *max_s);
  return buf;
}

void echo_config(const RunConfig& cfg, const RunDir& run) {
  const fs::path p = run.config() / "effective.json";
  const std::string text = cfg.to_json().dump(2) + "\n";
  if (fs::exists(p)) {
    if (read_text_file(p) != text)
      throw ConfigError("run directory " + run.root().string() + " was created with a different config (" +
                        p.string() + ")");
    return;
  }
  write_text_file(p, text);
}

features::SynthCorpus load_corpus(const RunConfig& cfg, const RunDir& run) {
  features::SynthCorpus corpus = features::synth_corpus(cfg.synth);
  const fs::path p = require(run.corpus() / "manifest.json", "synth");
  json stored;
  try {
    stored = json::parse(read_text_file(p));
  } catch (const json::exception& e) {
    throw FormatError("corpus manifest " + p.string() + " is malformed: " + e.what());
  }
  if (stored != manifest_json(corpus)) throw StateError("corpus manifest " + p.string() + " does not match the config");
  return corpus;
}

eval::TrialList all_test_trials(const features::SynthCorpus& corpus) {
  eval::TrialList trials;
  const auto test = test_utterances(corpus);
  for (std::size_t i = 0; i < test.size(); ++i)
    for (std::size_t j = i + 1; j < test.size(); ++j) {
      const auto& a = corpus.utterances[test[i]];
      const auto& b = corpus.utterances[test[j]];
      trials.add(a.speaker == b.speaker, a.id, b.id);
    }
  return trials;
}

void cmd_synth(const RunConfig& cfg, const RunDir& run, std::ostream& log) {
  const features::SynthCorpus corpus = features::synth_corpus(cfg.synth);
  fs::create_directories(run.corpus() / "wav");
  for (const auto& u : corpus.utterances)
    features::write_wav(run.corpus() / "wav" / (u.id + ".wav"), features::render_utterance(corpus, u));
  const eval::TrialList trials = all_test_trials(corpus);
  trials.write(run.corpus() / "trials.txt");
  write_text_file(run.corpus() / "manifest.json", manifest_json(corpus).dump(1) + "\n");
  log << "synth: " << corpus.speakers.size() << " speakers, " << corpus.utterances.size() << " utterances, "
      << trials.size() << " trials (" << trials.targets() << " target)\n";
}

void cmd_truncate(const RunConfig& cfg, const RunDir& run, double max_s, std::ostream& log) {
  const Condition cond = Condition::truncated(max_s);
  const features::SynthCorpus corpus = load_corpus(cfg, run);
  std::vector<eval::Utterance> utts;
  for (std::size_t u : test_utterances(corpus)) {
    const std::string& id = corpus.utterances[u].id;
    utts.push_back({id, features::read_wav(require(run.corpus() / "wav" / (id + ".wav"), "synth"))});
  }
  const auto trials = eval::TrialList::read(require(run.corpus() / "trials.txt", "synth"));
  const auto out = eval::truncate_testset(utts, trials, max_s);
  std::size_t cut = 0;
  fs::create_directories(wav_dir(run, cond));
  for (std::size_t i = 0; i < out.utterances.size(); ++i) {
    cut += out.utterances[i].wave.samples.size() < utts[i].wave.samples.size();
    features::write_wav(wav_dir(run, cond) / (out.utterances[i].id + ".wav"), out.utterances[i].wave);
  }
  out.trials.write(trials_path(run, cond));
  log << "truncate " << cond.name() << ": " << out.utterances.size() << " test utterances, " << cut
      << " shortened, " << out.trials.size() << " trials\n";
}

void cmd_fbank(const RunConfig& cfg, const RunDir& run, const Condition& cond, std::ostream& log) {
  const features::SynthCorpus corpus = load_corpus(cfg, run);
  // The full condition covers every split; truncated ones only the test set.
  const auto ids = cond.max_s ? test_utterances(corpus) : [&] {
    std::vector<std::size_t> all(corpus.utterances.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }();
  const fs::path producer_dir = wav_dir(run, cond);
  fs::create_directories(run.features() / cond.name());
  for (std::size_t u : ids) {
    const std::string& id = corpus.utterances[u].id;
    const auto wave = features::read_wav(require(producer_dir / (id + ".wav"), cond.max_s ? "truncate" : "synth"));
    features::write_feature_archive(feature_path(run, cond, id), features::compute_fbank(wave, cfg.fbank, id));
  }
  log << "fbank " << cond.name() << ": " << ids.size() << " archives\n";
}

void cmd_train(const RunConfig& cfg, const RunDir& run, std::ostream& log) {
  const features::SynthCorpus corpus = load_corpus(cfg, run);
  const training::TrainData data = training::prepare_train_data(corpus, [&](std::size_t u) {
    return features::read_feature_archive(
        require(feature_path(run, Condition::full(), corpus.utterances[u].id), "fbank"));
  });
  training::TrainConfig tc = cfg.train;
  tc.checkpoint_dir = run.checkpoints();
  backbone::Model<float> model(cfg.model_config());
  const training::TrainResult res = training::train(model, data, tc, [&](const std::string& line) {
    log << line << "\n";
  });
  write_text_file(run.reports() / "train_log.txt", res.log());
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "variant=%s params=%llu steps=%llu initial_loss=%.6f final_loss=%.6f loss_ratio=%.6f best_epoch=%zu "
                "best_val_eer=%.4f\n",
                std::string(backbone::variant_name(cfg.variant)).c_str(),
                static_cast<unsigned long long>(model.count_params()),
                static_cast<unsigned long long>(tc.total_steps()), res.initial_loss, res.final_loss,
                res.final_loss / res.initial_loss, res.best_epoch, 100 * res.epochs[res.best_epoch - 1].val_eer);
  write_text_file(run.reports() / "train_summary.txt", buf);
  log << buf;
}

void cmd_embed(const RunConfig& cfg, const RunDir& run, const Condition& cond, std::ostream& log) {
  const features::SynthCorpus corpus = load_corpus(cfg, run);
  auto model = load_trained(cfg, run);
  const auto embed_set = [&](const std::vector<std::size_t>& utts, const Condition& c) {
    eval::EmbeddingTable table;
    for (std::size_t u : utts) {
      const std::string& id = corpus.utterances[u].id;
      const auto f = features::read_feature_archive(require(feature_path(run, c, id), "fbank"));
      table[id] = backbone::embed(*model, f.data);
    }
    return table;
  };
  const auto test = embed_set(test_utterances(corpus), cond);
  write_embeddings(embeddings_path(run, cond.name()), cond.name(), test);
  std::size_t cohort = 0;
  if (cfg.eval.snorm) {
    // The cohort is always embedded from full-length audio.
    const auto table = embed_set(corpus.utterances_in(Split::kCohort), Condition::full());
    write_embeddings(embeddings_path(run, "cohort"), "full", table);
    cohort = table.size();
  }
  log << "embed " << cond.name() << ": " << test.size() << " test, " << cohort << " cohort embeddings\n";
}

void cmd_score(const RunConfig& cfg, const RunDir& run, const Condition& cond, std::ostream& log) {
  const auto trials = eval::TrialList::read(require(trials_path(run, cond), cond.max_s ? "truncate" : "synth"));
  const auto emb = read_embeddings(require(embeddings_path(run, cond.name()), "embed"));
  const auto raw = eval::score_trials(trials, emb);
  eval::write_scores(run.scores() / (cond.name() + "_raw.txt"), trials, raw);
  if (cfg.eval.snorm) {
    const auto cohort_table = read_embeddings(require(embeddings_path(run, "cohort"), "embed"));
    std::vector<std::vector<float>> cohort;
    for (const auto& [id, v] : cohort_table) cohort.push_back(v);
    const auto norm = eval::snorm_trials(trials, raw, emb, cohort, cfg.eval.top_k);
    eval::write_scores(run.scores() / (cond.name() + "_snorm.txt"), trials, norm);
  }
  log << "score " << cond.name() << ": " << trials.size() << " trials\n";
}

std::string cmd_eval(const RunConfig& cfg, const RunDir& run, const Condition& cond) {
  const auto key = eval::TrialList::read(require(trials_path(run, cond), cond.max_s ? "truncate" : "synth"));
  std::string report;
  std::vector<std::string> norms{"raw"};
  if (cfg.eval.snorm) norms.push_back("snorm");
  for (const auto& norm : norms) {
    const fs::path p = require(run.scores() / (cond.name() + "_" + norm + ".txt"), "score");
    const auto [trials, scores] = eval::read_scores(p, &key);
    trials.require_both_classes();
    report += eval::format_report(eval::compute_eer(scores, trials), eval::compute_mindcf(scores, trials, cfg.eval.dcf)) +
              " condition=" + cond.name() + " norm=" + norm + "\n";
  }
  write_text_file(run.reports() / ("eval_" + cond.name() + ".txt"), report);
  return report;
}

std::string eval_score_file(const fs::path& scores, const fs::path& trials, const eval::DcfParams& dcf) {
  const auto key = eval::TrialList::read(trials);
  const auto [t, s] = eval::read_scores(scores, &key);
  t.require_both_classes();
  return eval::format_report(eval::compute_eer(s, t), eval::compute_mindcf(s, t, dcf)) + "\n";
}

}  // namespace mfatdnn::cli
