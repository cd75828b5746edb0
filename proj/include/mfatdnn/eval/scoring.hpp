#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mfatdnn/eval/trials.hpp"

namespace mfatdnn::eval {

double cosine_score(std::span<const float> a, std::span<const float> b);
double cosine_score(std::span<const double> a, std::span<const double> b);

struct SideStats {
  double mean = 0.0;
  double stddev = 1.0;
};

struct CohortStats {
  SideStats enroll;
  SideStats test;
  std::size_t cohort_size = 0;
};

inline constexpr double kSigmaFloor = 1e-9;

// Mean / population standard deviation of one side's cohort scores. With
// top_k > 0 only the k highest scores are used (adaptive S-norm).
SideStats side_stats(std::span<const double> cohort_scores, std::size_t top_k = 0);

// s' = ((s - mu_e) / sigma_e + (s - mu_t) / sigma_t) / 2
double snorm(double s, const CohortStats& stats);

using EmbeddingTable = std::map<std::string, std::vector<float>>;

std::vector<double> score_trials(const TrialList& trials, const EmbeddingTable& emb);

// Symmetric S-norm of every trial score against a cohort embedding set.
std::vector<double> snorm_trials(const TrialList& trials, const std::vector<double>& raw, const EmbeddingTable& emb,
                                 const std::vector<std::vector<float>>& cohort, std::size_t top_k = 0);

}  // namespace mfatdnn::eval
