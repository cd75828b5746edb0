#include "mfatdnn/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>

#include "mfatdnn/error.hpp"

namespace mfatdnn::eval {

namespace {

// std::vector<bool> is not contiguous; copy labels into a plain array.
std::unique_ptr<bool[]> labels_of(const TrialList& trials) {
  auto out = std::make_unique<bool[]>(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) out[i] = trials[i].target;
  return out;
}

}  // namespace

std::vector<OperatingPoint> operating_points(std::span<const double> scores, std::span<const bool> is_target) {
  if (scores.size() != is_target.size()) throw ShapeError("one label per score required");
  std::size_t n_tar = 0;
  for (bool t : is_target) n_tar += t;
  const std::size_t n_non = scores.size() - n_tar;
  if (n_tar == 0 || n_non == 0)
    throw InputError("metrics need at least one target and one nontarget score");
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("non-finite score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<OperatingPoint> pts;
  pts.push_back({-inf, 0.0, 1.0});
  // Walking thresholds upward; at threshold scores[order[i]] everything below
  // it has been rejected.
  std::size_t miss = 0, fa = n_non;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = scores[order[i]];
    pts.push_back({thr, static_cast<double>(miss) / n_tar, static_cast<double>(fa) / n_non});
    for (; i < order.size() && scores[order[i]] == thr; ++i) {
      if (is_target[order[i]])
        ++miss;
      else
        --fa;
    }
  }
  pts.push_back({inf, 1.0, 0.0});
  return pts;
}

double compute_eer(std::span<const double> scores, std::span<const bool> is_target) {
  const auto pts = operating_points(scores, is_target);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double d = pts[k].p_miss - pts[k].p_fa;
    if (d < 0) continue;
    if (d == 0 || k == 0) return pts[k].p_miss;
    const auto& a = pts[k - 1];
    const auto& b = pts[k];
    const double t = (a.p_fa - a.p_miss) / ((b.p_miss - a.p_miss) - (b.p_fa - a.p_fa));
    return a.p_miss + t * (b.p_miss - a.p_miss);
  }
  return pts.back().p_miss;
}

double compute_eer(const std::vector<double>& scores, const TrialList& trials) {
  const auto l = labels_of(trials);
  return compute_eer(scores, std::span<const bool>(l.get(), trials.size()));
}

double compute_mindcf(std::span<const double> scores, std::span<const bool> is_target, const DcfParams& p) {
  if (!(p.p_target > 0 && p.p_target < 1 && p.c_fa > 0 && p.c_miss > 0)) throw ConfigError("invalid DCF parameters");
  const auto pts = operating_points(scores, is_target);
  const double norm = std::min(p.c_miss * p.p_target, p.c_fa * (1.0 - p.p_target));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& op : pts)
    best = std::min(best, p.c_miss * p.p_target * op.p_miss + p.c_fa * (1.0 - p.p_target) * op.p_fa);
  return best / norm;
}

double compute_mindcf(const std::vector<double>& scores, const TrialList& trials, const DcfParams& p) {
  const auto l = labels_of(trials);
  return compute_mindcf(scores, std::span<const bool>(l.get(), trials.size()), p);
}

double relative_improvement(double eer_base, double eer_new) {
  if (!(eer_base > 0)) throw InputError("relative improvement needs a positive baseline EER");
  return 100.0 * (eer_base - eer_new) / eer_base;
}

std::string format_report(double eer, double mindcf) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "eer=%.4f mindcf=%.4f", 100.0 * eer, mindcf);
  return buf;
}

}  // namespace mfatdnn::eval
