#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfatdnn/backbone/model.hpp"

namespace mfatdnn::cli {

inline constexpr std::size_t kComplexityFrames = 300;

struct ModuleCost {
  std::string module;  // first two name components, e.g. "backbone.block1"
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct VariantComplexity {
  backbone::ModelVariant variant{};
  std::uint64_t params = 0;
  std::uint64_t macs = 0;  // at kComplexityFrames frames
  std::vector<ModuleCost> breakdown;
  double target_params = 0.0;
  double target_macs = 0.0;
  double param_tolerance = 0.0;  // relative
  double param_deviation = 0.0;  // (params - target) / target
  double mac_deviation = 0.0;
  bool params_within = false;
};

struct ComplexityReport {
  std::vector<VariantComplexity> variants;
  // Set when all four variants are present.
  std::optional<bool> param_ordering;
  std::optional<bool> mac_ordering;

  bool passed() const;
  std::string text() const;
  nlohmann::json to_json() const;
};

// Published budget: {params, MACs at 300 frames}.
std::pair<double, double> complexity_target(backbone::ModelVariant v);
double param_tolerance(backbone::ModelVariant v);

VariantComplexity measure_complexity(backbone::ModelVariant v);
ComplexityReport complexity_report(const std::vector<backbone::ModelVariant>& variants);

}  // namespace mfatdnn::cli
