#include "mfatdnn/cli/complexity_report.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace mfatdnn::cli {

using backbone::ModelVariant;

namespace {

std::string module_of(const std::string& name) {
  const auto first = name.find('.');
  if (first == std::string::npos) return name;
  const auto second = name.find('.', first + 1);
  return second == std::string::npos ? name : name.substr(0, second);
}

// Expected strict order, smallest first.
constexpr std::array<ModelVariant, 4> kOrder{ModelVariant::kMfaLite, ModelVariant::kEcapaTdnn,
                                             ModelVariant::kMfaStandard, ModelVariant::kEcapaCnnTdnn};

}  // namespace

std::pair<double, double> complexity_target(ModelVariant v) {
  switch (v) {
    case ModelVariant::kEcapaTdnn: return {6.19e6, 1.57e9};
    case ModelVariant::kEcapaCnnTdnn: return {7.66e6, 2.29e9};
    case ModelVariant::kMfaStandard: return {7.32e6, 1.91e9};
    case ModelVariant::kMfaLite: return {5.93e6, 1.50e9};
  }
  return {0, 0};
}

double param_tolerance(ModelVariant v) { return v == ModelVariant::kEcapaTdnn ? 0.02 : 0.10; }

VariantComplexity measure_complexity(ModelVariant v) {
  const backbone::Model<float> model(backbone::ModelConfig::for_variant(v));
  VariantComplexity c;
  c.variant = v;
  std::map<std::string, std::size_t> index;
  const auto slot = [&](const std::string& name) -> ModuleCost& {
    const std::string m = module_of(name);
    auto [it, fresh] = index.try_emplace(m, c.breakdown.size());
    if (fresh) c.breakdown.push_back({m});
    return c.breakdown[it->second];
  };
  for (const auto& e : model.params())
    if (!e.param->buffer) slot(e.name).params += e.param->value.numel();
  for (const auto& e : model.trace_macs(kComplexityFrames)) slot(e.name).macs += e.macs;
  for (const auto& m : c.breakdown) {
    c.params += m.params;
    c.macs += m.macs;
  }
  std::tie(c.target_params, c.target_macs) = complexity_target(v);
  c.param_tolerance = param_tolerance(v);
  c.param_deviation = (static_cast<double>(c.params) - c.target_params) / c.target_params;
  c.mac_deviation = (static_cast<double>(c.macs) - c.target_macs) / c.target_macs;
  c.params_within = std::abs(c.param_deviation) <= c.param_tolerance;
  return c;
}

ComplexityReport complexity_report(const std::vector<ModelVariant>& variants) {
  ComplexityReport r;
  for (ModelVariant v : variants) r.variants.push_back(measure_complexity(v));
  std::map<ModelVariant, const VariantComplexity*> by;
  for (const auto& c : r.variants) by[c.variant] = &c;
  if (by.size() == kOrder.size()) {
    bool p = true, m = true;
    for (std::size_t i = 1; i < kOrder.size(); ++i) {
      p = p && by[kOrder[i - 1]]->params < by[kOrder[i]]->params;
      m = m && by[kOrder[i - 1]]->macs < by[kOrder[i]]->macs;
    }
    r.param_ordering = p;
    r.mac_ordering = m;
  }
  return r;
}

bool ComplexityReport::passed() const {
  for (const auto& c : variants)
    if (!c.params_within) return false;
  return param_ordering.value_or(true) && mac_ordering.value_or(true);
}

std::string ComplexityReport::text() const {
  std::string out;
  char buf[256];
  for (const auto& c : variants) {
    std::snprintf(buf, sizeof buf,
                  "variant=%s params=%llu target=%.2fM dev=%+.2f%% tol=%.0f%% %s macs@%zu=%llu target=%.2fG "
                  "dev=%+.2f%%\n",
                  std::string(backbone::variant_name(c.variant)).c_str(),
                  static_cast<unsigned long long>(c.params), c.target_params / 1e6, 100 * c.param_deviation,
                  100 * c.param_tolerance, c.params_within ? "within" : "outside", kComplexityFrames,
                  static_cast<unsigned long long>(c.macs), c.target_macs / 1e9, 100 * c.mac_deviation);
    out += buf;
    for (const auto& m : c.breakdown) {
      std::snprintf(buf, sizeof buf, "  %-22s params=%10llu macs=%13llu\n", m.module.c_str(),
                    static_cast<unsigned long long>(m.params), static_cast<unsigned long long>(m.macs));
      out += buf;
    }
  }
  if (param_ordering) {
    out += std::string("ordering params mfa-lite < ecapa-tdnn < mfa-standard < ecapa-cnn-tdnn: ") +
           (*param_ordering ? "holds" : "violated") + "\n";
    out += std::string("ordering macs mfa-lite < ecapa-tdnn < mfa-standard < ecapa-cnn-tdnn: ") +
           (*mac_ordering ? "holds" : "violated") + "\n";
  }
  return out;
}

nlohmann::json ComplexityReport::to_json() const {
  nlohmann::json j;
  j["frames"] = kComplexityFrames;
  j["variants"] = nlohmann::json::array();
  for (const auto& c : variants) {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& m : c.breakdown) b.push_back({{"module", m.module}, {"params", m.params}, {"macs", m.macs}});
    j["variants"].push_back({{"variant", std::string(backbone::variant_name(c.variant))},
                             {"params", c.params},
                             {"macs", c.macs},
                             {"target_params", c.target_params},
                             {"target_macs", c.target_macs},
                             {"param_tolerance", c.param_tolerance},
                             {"param_deviation", c.param_deviation},
                             {"mac_deviation", c.mac_deviation},
                             {"params_within", c.params_within},
                             {"breakdown", b}});
  }
  if (param_ordering) {
    j["param_ordering"] = *param_ordering;
    j["mac_ordering"] = *mac_ordering;
  }
  j["passed"] = passed();
  return j;
}

}  // namespace mfatdnn::cli
