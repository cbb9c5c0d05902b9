#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fuselab/volume.hpp"

namespace fuselab {

/// Per-expert reliability: sensitivity = p(vote 1 | lesion), specificity =
/// p(vote 0 | background).
struct RaterPerformance {
  double sensitivity = 0.9;
  double specificity = 0.9;

  friend bool operator==(const RaterPerformance&, const RaterPerformance&) = default;
};

struct RaterParams {
  std::vector<RaterPerformance> raters;

  RaterParams() = default;
  explicit RaterParams(std::vector<RaterPerformance> r) : raters(std::move(r)) {}
  static RaterParams uniform(std::size_t m, double sensitivity, double specificity);

  std::size_t size() const noexcept { return raters.size(); }
  const RaterPerformance& operator[](std::size_t i) const { return raters[i]; }
  RaterPerformance& operator[](std::size_t i) { return raters[i]; }

  /// Throws ValidationError unless every entry lies in [0, 1].
  void validate() const;

  friend bool operator==(const RaterParams&, const RaterParams&) = default;
};

/// Bounds applied to θ after every M-step and inside posterior/objective
/// evaluation.
inline constexpr double kThetaFloor = 1e-7;
inline constexpr double kThetaCeil = 1.0 - 1e-7;

double clamp_probability(double p);
RaterParams clamped(const RaterParams& params);

/// Largest max |Δθ| over all 2m entries.
double max_abs_change(const RaterParams& a, const RaterParams& b);

enum class Variant { kBinary, kSoftExact, kSoftExactMC, kSimplified };

/// How soft variants update θ. ExpectedCount is the exact EM update for the
/// variant's own objective; PluginMean substitutes q for the hard vote in the
/// binary update and carries no ascent guarantee.
enum class MStepMode { kExpectedCount, kPluginMean };

std::string_view variant_name(Variant v);  // "binary", "soft-exact", "soft-mc", "simplified"
Variant parse_variant(std::string_view name);
std::string_view mstep_mode_name(MStepMode m);  // "expected-count", "plugin-mean"
MStepMode parse_mstep_mode(std::string_view name);

/// Snapshot handed to FusionConfig::observer after each M-step.
struct IterationState {
  int iteration = 0;                    ///< 0-based
  std::span<const double> posterior;    ///< w(1) that fed this M-step
  const RaterParams* params = nullptr;  ///< θ after the (clamped) update
  double objective = 0.0;               ///< objective at the updated θ
};

struct FusionConfig {
  std::optional<double> prior;  ///< nullopt = AUTO (grand mean vote)
  double init_sensitivity = 0.9;
  double init_specificity = 0.9;
  int max_iters = 100;
  double tol = 1e-6;
  Variant variant = Variant::kBinary;
  std::size_t mc_samples = 1000;
  std::uint64_t mc_seed = 0;
  MStepMode mstep_mode = MStepMode::kExpectedCount;
  std::size_t threads = 1;
  std::function<void(const IterationState&)> observer;

  void validate() const;
};

struct FusionResult {
  VolumeGrid posterior;  ///< kind Posterior, holds w(1)
  RaterParams params;
  std::vector<double> ll_trace;  ///< objective at θ after each iteration
  int iters_run = 0;
  bool converged = false;
  double prior = 0.0;  ///< resolved prior actually used
  bool objective_approximate = false;
};

/// AUTO prior: mean of all votes over experts and voxels (soft votes count
/// fractionally), clamped into [kThetaFloor, kThetaCeil].
double resolve_prior(const ExpertStack& stack, const std::optional<double>& prior);

/// Dispatches to run_em or run_soft_em by config.variant.
FusionResult fuse(const ExpertStack& stack, const FusionConfig& config);

}  // namespace fuselab
