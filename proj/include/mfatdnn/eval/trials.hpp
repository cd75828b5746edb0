#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mfatdnn::eval {

struct Trial {
  bool target = false;
  std::string enroll;
  std::string test;
};

// Ordered trial records; (enroll, test) pairs are unique.
class TrialList {
 public:
  void add(bool target, std::string enroll, std::string test);
  const std::vector<Trial>& records() const { return trials_; }
  std::size_t size() const { return trials_.size(); }
  const Trial& operator[](std::size_t i) const { return trials_[i]; }
  std::size_t targets() const;
  std::size_t nontargets() const { return size() - targets(); }
  // Throws InputError unless both classes are present.
  void require_both_classes() const;

  // `<0|1> <enroll-id> <test-id>` per line.
  static TrialList read(const std::filesystem::path& path);
  static TrialList parse(const std::string& text, const std::string& source = "<string>");
  void write(const std::filesystem::path& path) const;
  std::string str() const;

 private:
  std::vector<Trial> trials_;
  std::set<std::pair<std::string, std::string>> seen_;
};

// One finite score per trial, in trial order.
struct ScoreSet {
  std::vector<double> raw;
  std::optional<std::vector<double>> normalized;
  std::string variant;
  std::string condition = "full";

  void validate(const TrialList& trials) const;
};

// `<enroll-id> <test-id> <score %.6f>` per line, trial order.
void write_scores(const std::filesystem::path& path, const TrialList& trials, const std::vector<double>& scores);
std::string format_scores(const TrialList& trials, const std::vector<double>& scores);
// Reads a score file and the trials it implies. Labels are taken from `key`
// when given (pairs must match it one to one, in any order); otherwise the
// returned trials are all marked nontarget.
std::pair<TrialList, std::vector<double>> read_scores(const std::filesystem::path& path,
                                                      const TrialList* key = nullptr);

}  // namespace mfatdnn::eval
