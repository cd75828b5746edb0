#pragma once

#include <span>
#include <string>
#include <vector>

#include "mfatdnn/eval/trials.hpp"

namespace mfatdnn::eval {

// One (P_miss, P_fa) pair per threshold. Thresholds run over -inf, every
// distinct score in ascending order, and +inf; a trial is accepted when
// score >= threshold.
struct OperatingPoint {
  double threshold;
  double p_miss;
  double p_fa;
};

std::vector<OperatingPoint> operating_points(std::span<const double> scores, std::span<const bool> is_target);

// EER in [0, 1], linearly interpolated between the adjacent operating points
// where P_miss - P_fa changes sign.
double compute_eer(std::span<const double> scores, std::span<const bool> is_target);
double compute_eer(const std::vector<double>& scores, const TrialList& trials);

struct DcfParams {
  double p_target = 0.01;
  double c_fa = 1.0;
  double c_miss = 1.0;
};

// min over thresholds of c_miss p P_miss + c_fa (1 - p) P_fa, divided by
// min(c_miss p, c_fa (1 - p)).
double compute_mindcf(std::span<const double> scores, std::span<const bool> is_target, const DcfParams& p = {});
double compute_mindcf(const std::vector<double>& scores, const TrialList& trials, const DcfParams& p = {});

// 100 (base - new) / base.
double relative_improvement(double eer_base, double eer_new);

// `eer=<percent %.4f> mindcf=<%.4f>`
std::string format_report(double eer, double mindcf);

}  // namespace mfatdnn::eval
