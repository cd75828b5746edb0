#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfatdnn/nn/gradcheck.hpp"

namespace mfatdnn::cli {

struct GradCheckEntry {
  std::string name;
  std::uint64_t seed = 0;
  nn::GradCheckResult result;
};

// Finite-difference checks at 64-bit of every layer type, every composite
// module and one tiny model per variant, repeated over `seeds` seeds.
std::vector<GradCheckEntry> run_gradcheck_suite(std::size_t seeds, std::uint64_t base_seed = 0);

struct GradCheckSummary {
  std::string name;
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::size_t checked = 0;  // coordinates compared
  double max_rel_error = 0.0;
  std::string worst;
};

// One row per check name, in first-seen order.
std::vector<GradCheckSummary> summarize(const std::vector<GradCheckEntry>& entries);

// `<name> runs=<n> coords=<n> max_rel=<e> <PASS|FAIL>` per check. Differences
// under the absolute tolerance count as zero relative error.
std::string format_gradcheck(const std::vector<GradCheckSummary>& rows);

}  // namespace mfatdnn::cli
