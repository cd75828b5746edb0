#include "mfatdnn/eval/trials.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mfatdnn/error.hpp"

namespace mfatdnn::eval {

void TrialList::add(bool target, std::string enroll, std::string test) {
  if (enroll.empty() || test.empty()) throw InputError("trial ids must be non-empty");
  if (!seen_.emplace(enroll, test).second)
    throw InputError("duplicate trial pair (" + enroll + ", " + test + ")");
  trials_.push_back({target, std::move(enroll), std::move(test)});
}

std::size_t TrialList::targets() const {
  std::size_t n = 0;
  for (const auto& t : trials_) n += t.target;
  return n;
}

void TrialList::require_both_classes() const {
  if (targets() == 0 || nontargets() == 0)
    throw InputError("trial list needs at least one target and one nontarget trial (" + std::to_string(targets()) +
                     " targets, " + std::to_string(nontargets()) + " nontargets)");
}

TrialList TrialList::parse(const std::string& text, const std::string& source) {
  TrialList out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string label, enroll, test, extra;
    if (!(ls >> label)) continue;
    if (!(ls >> enroll >> test) || (ls >> extra) || (label != "0" && label != "1"))
      throw FormatError(source + ":" + std::to_string(lineno) + ": expected '<0|1> <enroll-id> <test-id>'");
    out.add(label == "1", enroll, test);
  }
  return out;
}

TrialList TrialList::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trial list " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string TrialList::str() const {
  std::string s;
  for (const auto& t : trials_) s += (t.target ? "1 " : "0 ") + t.enroll + " " + t.test + "\n";
  return s;
}

void TrialList::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << str();
}

void ScoreSet::validate(const TrialList& trials) const {
  if (raw.size() != trials.size())
    throw ShapeError(std::to_string(raw.size()) + " scores for " + std::to_string(trials.size()) + " trials");
  for (double s : raw)
    if (!std::isfinite(s)) throw NumericError("non-finite trial score");
  if (normalized) {
    if (normalized->size() != trials.size()) throw ShapeError("normalized score count differs from trial count");
    for (double s : *normalized)
      if (!std::isfinite(s)) throw NumericError("non-finite normalized score");
  }
}

std::string format_scores(const TrialList& trials, const std::vector<double>& scores) {
  if (scores.size() != trials.size()) throw ShapeError("one score per trial required");
  std::string s;
  char buf[64];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %.6f\n", scores[i]);
    s += trials[i].enroll + " " + trials[i].test + buf;
  }
  return s;
}

void write_scores(const std::filesystem::path& path, const TrialList& trials, const std::vector<double>& scores) {
  const std::string s = format_scores(trials, scores);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << s;
}

std::pair<TrialList, std::vector<double>> read_scores(const std::filesystem::path& path, const TrialList* key) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open score file " + path.string());
  std::map<std::pair<std::string, std::string>, bool> labels;
  if (key)
    for (const auto& t : key->records()) labels[{t.enroll, t.test}] = t.target;
  TrialList trials;
  std::vector<double> scores;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string enroll, test, extra;
    double s;
    if (!(ls >> enroll)) continue;
    if (!(ls >> test >> s) || (ls >> extra))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected '<enroll-id> <test-id> <score>'");
    if (!std::isfinite(s)) throw NumericError(path.string() + ":" + std::to_string(lineno) + ": non-finite score");
    bool target = false;
    if (key) {
      const auto it = labels.find({enroll, test});
      if (it == labels.end())
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": pair (" + enroll + ", " + test +
                         ") is not in the trial list");
      target = it->second;
    }
    trials.add(target, enroll, test);
    scores.push_back(s);
  }
  if (key && trials.size() != key->size())
    throw InputError(path.string() + ": " + std::to_string(trials.size()) + " scores for " +
                     std::to_string(key->size()) + " trials");
  return {std::move(trials), std::move(scores)};
}

}  // namespace mfatdnn::eval
