#pragma once

// Shared machinery for the EM variants. Every variant evaluates a "pass" at a
// fixed θ: posterior w(1) per voxel, the per-expert sufficient statistics of
// its M-step, and its objective. The variants are arranged so that all-hard
// soft votes reproduce the binary pass bit for bit: same log tables, same
// expert summation order, same kernels, same reduction partition.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fuselab/fusion.hpp"
#include "fuselab/soft_staple.hpp"
#include "fuselab/volume.hpp"

namespace fuselab::detail {

/// Log conditional vote probabilities at clamped θ, plus log prior.
struct LogModel {
  std::vector<double> sens, spec;        // clamped
  std::vector<double> l1_one, l1_zero;   // log p(vote=1|x=1), log p(vote=0|x=1)
  std::vector<double> l0_one, l0_zero;   // log p(vote=1|x=0), log p(vote=0|x=0)
  double log_prior1 = 0.0;
  double log_prior0 = 0.0;

  LogModel(const RaterParams& params, double prior);
  std::size_t size() const noexcept { return sens.size(); }
};

inline double posterior_from_logs(double s0, double s1, const LogModel& lm) {
  const double d = (lm.log_prior1 + s1) - (lm.log_prior0 + s0);
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

/// log((1-p) L0 + p L1) from the two log sums.
inline double log_evidence(double s0, double s1, const LogModel& lm) {
  const double j1 = lm.log_prior1 + s1;
  const double j0 = lm.log_prior0 + s0;
  const double hi = j1 > j0 ? j1 : j0;
  const double lo = j1 > j0 ? j0 : j1;
  return hi + std::log1p(std::exp(lo - hi));
}

/// Identity order 0..m-1 when `order` is empty.
std::vector<std::size_t> resolve_order(std::span<const std::size_t> order, std::size_t m);

/// Soft variants enumerate and sample in canonical expert order: bit j of a
/// vote combination belongs to expert order[j]. This keeps them exactly
/// equivariant when the inputs are reordered.
RaterParams canonical_params(const RaterParams& params, std::span<const std::size_t> order);
std::vector<double> canonical_votes(std::span<const double> q, std::span<const std::size_t> order);

/// Log sums (s0, s1) for the hard combination B, accumulated in `order`.
void combination_log_sums(const LogModel& lm, std::span<const std::size_t> order,
                          VoteCombination b, double& s0, double& s1);

/// Per-combination posterior p(x=1|B), its complement, and log evidence.
struct CombinationTables {
  std::vector<double> post1, post0, evidence;
};
CombinationTables combination_tables(const LogModel& lm, std::span<const std::size_t> order);

/// table[B] = ∏_i q_i(b_i), built by doubling in expert index order.
void build_joint_table(std::span<const double> q, std::span<double> table);

/// Sum of table[B] over B whose bit `bit` equals `value`, ascending B.
double masked_sum(std::span<const double> table, std::size_t bit, bool value);

/// Draws B ~ q for sample k of voxel t.
VoteCombination draw_combination(std::span<const double> q, std::uint64_t seed, std::uint64_t voxel,
                                 std::uint32_t sample);

void check_guard(std::size_t m);

struct PassOptions {
  bool contributions = true;
  bool objective = true;
  MStepMode mode = MStepMode::kExpectedCount;
  std::size_t threads = 1;
  std::size_t mc_samples = 1000;
  std::uint64_t mc_seed = 0;
};

struct PassResult {
  std::vector<double> w1;
  std::vector<double> sens_num, spec_num;  // per expert
  double sum_w1 = 0.0;
  double sum_w0 = 0.0;
  double objective = 0.0;
  bool objective_approximate = false;
};

using PassFn = std::function<PassResult(const RaterParams&)>;

PassResult binary_pass(const ExpertStack& stack, std::span<const std::size_t> order,
                       const RaterParams& params, double prior, const PassOptions& opt);
PassResult soft_exact_pass(const ExpertStack& stack, std::span<const std::size_t> order,
                           const RaterParams& params, double prior, const PassOptions& opt);
PassResult mc_pass(const ExpertStack& stack, std::span<const std::size_t> order,
                   const RaterParams& params, double prior, const PassOptions& opt);
PassResult simplified_pass(const ExpertStack& stack, std::span<const std::size_t> order,
                           const RaterParams& params, double prior, const PassOptions& opt);

/// θ_i = num_i / Σ w. Throws DegeneratePosterior on an empty class.
RaterParams update_from(const PassResult& pass);

FusionResult run_loop(const ExpertStack& stack, const FusionConfig& config, double prior,
                      const PassFn& pass);

}  // namespace fuselab::detail
