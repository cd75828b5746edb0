#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mfatdnn/cli/commands.hpp"
#include "mfatdnn/cli/complexity_report.hpp"
#include "mfatdnn/cli/gradcheck_suite.hpp"
#include "mfatdnn/cli/run_config.hpp"
#include "mfatdnn/cli/run_dir.hpp"
#include "mfatdnn/error.hpp"

namespace {

using namespace mfatdnn;
using namespace mfatdnn::cli;

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kInput = 3,
  kFormat = 4,
  kTruncated = 5,
  kVersion = 6,
  kShape = 7,
  kShapeMismatch = 8,
  kNumeric = 9,
  kState = 10,
  kGradcheckFailed = 11,
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string out;
  std::optional<double> max_duration;
  // gradcheck
  std::size_t seeds = 10;
  // complexity
  bool json = false;
  // standalone eval
  std::string scores, trials;
};

const std::vector<std::string> kVariantNames{"ecapa-tdnn", "ecapa-cnn-tdnn", "mfa-standard", "mfa-lite"};

void add_run_flags(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Run config (JSON); defaults apply to absent keys")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Top-level seed; overrides the config's 'seed'");
  sub->add_option("--variant", o.variant, "Model variant; overrides the config's 'variant'")
      ->check(CLI::IsMember(kVariantNames));
  sub->add_option("--out", o.out, "Run directory (default: runs/<config name>)");
}

void add_duration_flag(CLI::App* sub, Options& o, const std::string& help) {
  sub->add_option("--max-duration", o.max_duration, help)->check(CLI::Range(4.0, 10.0));
}

RunConfig effective_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.seed) cfg.apply_seed(*o.seed);
  if (!o.variant.empty()) cfg.variant = backbone::parse_variant(o.variant);
  cfg.validate();
  return cfg;
}

std::filesystem::path run_root(const Options& o, const RunConfig& cfg) {
  return o.out.empty() ? std::filesystem::path("runs") / cfg.name : std::filesystem::path(o.out);
}

Condition condition(const Options& o) {
  return o.max_duration ? Condition::truncated(*o.max_duration) : Condition::full();
}

int run_stage(const std::string& stage, const Options& o) {
  const RunConfig cfg = effective_config(o);
  RunDir run(run_root(o, cfg));
  echo_config(cfg, run);
  if (stage == "synth") {
    cmd_synth(cfg, run, std::cout);
  } else if (stage == "truncate") {
    if (o.max_duration) {
      cmd_truncate(cfg, run, *o.max_duration, std::cout);
    } else {
      for (double d : cfg.eval.durations) cmd_truncate(cfg, run, d, std::cout);
    }
  } else if (stage == "fbank") {
    cmd_fbank(cfg, run, condition(o), std::cout);
  } else if (stage == "train") {
    cmd_train(cfg, run, std::cout);
  } else if (stage == "embed") {
    cmd_embed(cfg, run, condition(o), std::cout);
  } else if (stage == "score") {
    cmd_score(cfg, run, condition(o), std::cout);
  } else if (stage == "eval") {
    std::cout << cmd_eval(cfg, run, condition(o));
  }
  return kOk;
}

int run_eval(const Options& o) {
  const bool standalone = !o.scores.empty() || !o.trials.empty();
  if (!standalone) return run_stage("eval", o);
  if (o.scores.empty() || o.trials.empty()) throw ConfigError("--scores and --trials must be given together");
  const RunConfig cfg = effective_config(o);
  std::cout << eval_score_file(o.scores, o.trials, cfg.eval.dcf);
  return kOk;
}

int run_complexity(const Options& o) {
  std::vector<backbone::ModelVariant> variants;
  if (o.variant.empty()) {
    variants.assign(backbone::kAllVariants.begin(), backbone::kAllVariants.end());
  } else {
    variants.push_back(backbone::parse_variant(o.variant));
  }
  const ComplexityReport report = complexity_report(variants);
  const std::string text = report.text(), json = report.to_json().dump(2) + "\n";
  std::cout << (o.json ? json : text);
  if (!o.out.empty()) {
    RunDir run(o.out);
    write_text_file(run.reports() / "complexity.txt", text);
    write_text_file(run.reports() / "complexity.json", json);
  }
  return kOk;
}

int run_gradcheck(const Options& o) {
  const auto rows = summarize(run_gradcheck_suite(o.seeds, o.seed.value_or(0)));
  const std::string text = format_gradcheck(rows);
  std::cout << text;
  if (!o.out.empty()) {
    RunDir run(o.out);
    write_text_file(run.reports() / "gradcheck.txt", text);
  }
  for (const auto& r : rows)
    if (r.failures) {
      std::cerr << "gradcheck failed: " << r.name << " worst " << r.worst << "\n";
      return kGradcheckFailed;
    }
  return kOk;
}

int report(const char* kind, const std::exception& e, int code) {
  std::cerr << "error (" << kind << "): " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MFA-TDNN speaker verification toolkit"};
  app.require_subcommand(1);
  Options o;

  const auto stage = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    add_run_flags(sub, o);
    return sub;
  };
  stage("synth", "Render the synthetic corpus and its trial list into corpus/");
  add_duration_flag(stage("truncate", "Cut test utterances to at most --max-duration seconds "
                                      "(every configured eval duration when omitted)"),
                    o, "Maximum utterance duration in seconds, 4..10");
  add_duration_flag(stage("fbank", "Extract filterbank archives into features/<cond>/"), o,
                    "Use the truncated test set of this duration instead of the full corpus");
  stage("train", "Train the configured variant on features/full; writes checkpoints/ and reports/");
  add_duration_flag(stage("embed", "Embed test (and cohort) utterances with checkpoints/best.ckpt"), o,
                    "Embed the truncated test set of this duration");
  add_duration_flag(stage("score", "Cosine-score the trial list, raw and S-normalized"), o,
                    "Score the truncated test set of this duration");
  auto* ev = stage("eval", "EER and minDCF of the scored trials; or of --scores against --trials");
  add_duration_flag(ev, o, "Evaluate the truncated test set of this duration");
  ev->add_option("--scores", o.scores, "Standalone score file '<enroll> <test> <score>'")->check(CLI::ExistingFile);
  ev->add_option("--trials", o.trials, "Standalone trial key '<0|1> <enroll> <test>'")->check(CLI::ExistingFile);

  auto* cx = app.add_subcommand("complexity", "Parameter and MAC (300 frames) report per variant");
  cx->add_option("--variant", o.variant, "Report one variant (default: all four with ordering verdicts)")
      ->check(CLI::IsMember(kVariantNames));
  cx->add_option("--out", o.out, "Also write reports/complexity.{txt,json} under this directory");
  cx->add_flag("--json", o.json, "Print JSON instead of text");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every layer and module");
  gc->add_option("--seed", o.seed, "First seed (default 0)");
  gc->add_option("--seeds", o.seeds, "Number of seeds (default 10)")->check(CLI::PositiveNumber);
  gc->add_option("--out", o.out, "Also write reports/gradcheck.txt under this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "complexity") return run_complexity(o);
    if (cmd == "gradcheck") return run_gradcheck(o);
    if (cmd == "eval") return run_eval(o);
    return run_stage(cmd, o);
  } catch (const ConfigError& e) {
    return report("config", e, kConfig);
  } catch (const TruncatedFileError& e) {
    return report("truncated file", e, kTruncated);
  } catch (const VersionMismatchError& e) {
    return report("version mismatch", e, kVersion);
  } catch (const ShapeMismatchError& e) {
    std::cerr << "error (shape mismatch): parameter '" << e.param() << "': " << e.what() << "\n";
    return kShapeMismatch;
  } catch (const FormatError& e) {
    return report("format", e, kFormat);
  } catch (const InputError& e) {
    return report("input", e, kInput);
  } catch (const ShapeError& e) {
    return report("shape", e, kShape);
  } catch (const NumericError& e) {
    return report("numeric", e, kNumeric);
  } catch (const StateError& e) {
    return report("state", e, kState);
  } catch (const std::exception& e) {
    return report("unexpected", e, kOther);
  }
}
