#include "fuselab/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fuselab/errors.hpp"
#include "fuselab/soft_staple.hpp"
#include "fuselab/staple.hpp"

namespace fuselab {

RaterParams RaterParams::uniform(std::size_t m, double sensitivity, double specificity) {
  return RaterParams(std::vector<RaterPerformance>(m, RaterPerformance{sensitivity, specificity}));
}

void RaterParams::validate() const {
  for (std::size_t i = 0; i < raters.size(); ++i) {
    const auto& r = raters[i];
    if (!(r.sensitivity >= 0.0 && r.sensitivity <= 1.0 && r.specificity >= 0.0 &&
          r.specificity <= 1.0)) {
      throw ValidationError(ValidationError::Reason::kRangeViolation,
                            "rater " + std::to_string(i) + " has θ outside [0,1]");
    }
  }
}

double clamp_probability(double p) { return std::min(kThetaCeil, std::max(kThetaFloor, p)); }

RaterParams clamped(const RaterParams& params) {
  RaterParams out = params;
  for (auto& r : out.raters) {
    r.sensitivity = clamp_probability(r.sensitivity);
    r.specificity = clamp_probability(r.specificity);
  }
  return out;
}

double max_abs_change(const RaterParams& a, const RaterParams& b) {
  if (a.size() != b.size()) throw Error("rater count mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i].sensitivity - b[i].sensitivity));
    worst = std::max(worst, std::abs(a[i].specificity - b[i].specificity));
  }
  return worst;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kBinary:
      return "binary";
    case Variant::kSoftExact:
      return "soft-exact";
    case Variant::kSoftExactMC:
      return "soft-mc";
    case Variant::kSimplified:
      return "simplified";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "binary") return Variant::kBinary;
  if (name == "soft-exact") return Variant::kSoftExact;
  if (name == "soft-mc") return Variant::kSoftExactMC;
  if (name == "simplified") return Variant::kSimplified;
  throw ValidationError(ValidationError::Reason::kBadConfig,
                        "unknown variant '" + std::string(name) + "'");
}

std::string_view mstep_mode_name(MStepMode m) {
  return m == MStepMode::kExpectedCount ? "expected-count" : "plugin-mean";
}

MStepMode parse_mstep_mode(std::string_view name) {
  if (name == "expected-count") return MStepMode::kExpectedCount;
  if (name == "plugin-mean") return MStepMode::kPluginMean;
  throw ValidationError(ValidationError::Reason::kBadConfig,
                        "unknown M-step mode '" + std::string(name) + "'");
}

void FusionConfig::validate() const {
  auto bad = [](const std::string& what) {
    throw ValidationError(ValidationError::Reason::kBadConfig, what);
  };
  if (prior && !(*prior > 0.0 && *prior < 1.0)) bad("prior must lie in (0,1)");
  if (!(tol > 0.0)) bad("tol must be positive");
  if (max_iters < 1) bad("max_iters must be at least 1");
  if (!(init_sensitivity >= 0.0 && init_sensitivity <= 1.0)) bad("init sensitivity outside [0,1]");
  if (!(init_specificity >= 0.0 && init_specificity <= 1.0)) bad("init specificity outside [0,1]");
  if (variant == Variant::kSoftExactMC && mc_samples < 1) bad("soft-mc needs at least one sample");
  if (threads < 1) bad("threads must be at least 1");
}

double resolve_prior(const ExpertStack& stack, const std::optional<double>& prior) {
  if (prior) return *prior;
  long double total = 0.0L;
  std::size_t count = 0;
  for (const auto& g : stack.experts) {
    for (double v : g.values()) total += v;
    count += g.size();
  }
  const double mean = count == 0 ? 0.5 : static_cast<double>(total / count);
  return clamp_probability(mean);
}

FusionResult fuse(const ExpertStack& stack, const FusionConfig& config) {
  if (config.variant == Variant::kBinary) return run_em(stack, config);
  return run_soft_em(stack, config);
}

}  // namespace fuselab
