#include "mfatdnn/eval/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mfatdnn/error.hpp"

namespace mfatdnn::eval {

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("cosine of vectors with different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (!(aa > 0) || !(bb > 0)) throw InputError("cosine score of a zero-norm embedding");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

const std::vector<float>& lookup(const EmbeddingTable& emb, const std::string& id) {
  const auto it = emb.find(id);
  if (it == emb.end()) throw InputError("no embedding for utterance '" + id + "'");
  return it->second;
}

}  // namespace

double cosine_score(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine_score(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

SideStats side_stats(std::span<const double> cohort_scores, std::size_t top_k) {
  if (cohort_scores.empty()) throw InputError("empty cohort");
  std::vector<double> s(cohort_scores.begin(), cohort_scores.end());
  if (top_k > 0 && top_k < s.size()) {
    std::partial_sort(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(top_k), s.end(), std::greater<>());
    s.resize(top_k);
  }
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  var /= static_cast<double>(s.size());
  return {mean, std::sqrt(var)};
}

double snorm(double s, const CohortStats& st) {
  if (!(st.enroll.stddev > kSigmaFloor) || !(st.test.stddev > kSigmaFloor))
    throw NumericError("S-norm cohort standard deviation at or below the floor");
  return 0.5 * ((s - st.enroll.mean) / st.enroll.stddev + (s - st.test.mean) / st.test.stddev);
}

std::vector<double> score_trials(const TrialList& trials, const EmbeddingTable& emb) {
  std::vector<double> out;
  out.reserve(trials.size());
  for (const auto& t : trials.records()) out.push_back(cosine_score(lookup(emb, t.enroll), lookup(emb, t.test)));
  return out;
}

std::vector<double> snorm_trials(const TrialList& trials, const std::vector<double>& raw, const EmbeddingTable& emb,
                                 const std::vector<std::vector<float>>& cohort, std::size_t top_k) {
  if (raw.size() != trials.size()) throw ShapeError("one raw score per trial required");
  std::map<std::string, SideStats> cache;
  auto stats_for = [&](const std::string& id) {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    const auto& e = lookup(emb, id);
    std::vector<double> s;
    s.reserve(cohort.size());
    for (const auto& c : cohort) s.push_back(cosine_score(e, c));
    return cache[id] = side_stats(s, top_k);
  };
  std::vector<double> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const CohortStats st{stats_for(trials[i].enroll), stats_for(trials[i].test), cohort.size()};
    out.push_back(snorm(raw[i], st));
  }
  return out;
}

}  // namespace mfatdnn::eval
