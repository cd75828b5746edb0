#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mfatdnn/cli/run_config.hpp"
#include "mfatdnn/cli/run_dir.hpp"
#include "mfatdnn/eval/metrics.hpp"
#include "mfatdnn/features/synth.hpp"

// Pipeline stages over one run directory. Each stage reads the artifacts of
// the previous ones and rewrites only its own outputs:
//   synth     corpus/{manifest.json, trials.txt, wav/<utt>.wav}
//   truncate  corpus/max<d>s/{trials.txt, wav/<utt>.wav}
//   fbank     features/<cond>/<utt>.mfaf
//   train     checkpoints/*.ckpt, reports/{train_log.txt, train_summary.txt}
//   embed     scores/embeddings_<cond>.json, scores/embeddings_cohort.json
//   score     scores/<cond>_raw.txt [, scores/<cond>_snorm.txt]
//   eval      reports/eval_<cond>.txt
// <cond> is "full" or "max<d>s" for a truncated test set.
namespace mfatdnn::cli {

struct Condition {
  std::optional<double> max_s;

  std::string name() const;
  static Condition full() { return {}; }
  static Condition truncated(double s) { return {s}; }
};

// Stores the effective config in config/effective.json. A run directory keeps
// the config it was created with; a different one is a ConfigError.
void echo_config(const RunConfig& cfg, const RunDir& run);

// Regenerates the corpus description from the config and checks it against
// corpus/manifest.json.
features::SynthCorpus load_corpus(const RunConfig& cfg, const RunDir& run);

// Every pair of test utterances; target when both come from one speaker.
eval::TrialList all_test_trials(const features::SynthCorpus& corpus);

void cmd_synth(const RunConfig& cfg, const RunDir& run, std::ostream& log);
void cmd_truncate(const RunConfig& cfg, const RunDir& run, double max_s, std::ostream& log);
void cmd_fbank(const RunConfig& cfg, const RunDir& run, const Condition& cond, std::ostream& log);
void cmd_train(const RunConfig& cfg, const RunDir& run, std::ostream& log);
void cmd_embed(const RunConfig& cfg, const RunDir& run, const Condition& cond, std::ostream& log);
void cmd_score(const RunConfig& cfg, const RunDir& run, const Condition& cond, std::ostream& log);
// Returns the report written to reports/eval_<cond>.txt: one line per
// normalization, `eer=<%> mindcf=<v> condition=<cond> norm=<raw|snorm>`.
std::string cmd_eval(const RunConfig& cfg, const RunDir& run, const Condition& cond);

// Metric report of a standalone score file against a trial key.
std::string eval_score_file(const std::filesystem::path& scores, const std::filesystem::path& trials,
                            const eval::DcfParams& dcf);

}  // namespace mfatdnn::cli
