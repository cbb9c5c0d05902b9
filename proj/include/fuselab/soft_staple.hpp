#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fuselab/fusion.hpp"
#include "fuselab/volume.hpp"

namespace fuselab {

/// Exact enumeration over 2^m vote combinations is refused above this m.
inline constexpr std::size_t kEnumerationGuard = 20;

/// A joint hard vote B; bit i (least significant first) is expert i's vote.
using VoteCombination = std::uint32_t;

/// q(B) = ∏_i q_i(b_i), with q_i(0) = 1 - q_i(1).
double joint_soft_prob(std::span<const double> soft_votes, VoteCombination combination);

/// Σ_B q(B) · p(x = 1 | B; θ). Throws CapacityError above the guard.
/// `order` fixes the canonical expert order used for enumeration, sampling
/// and summation (the stack-level functions pass expert_order); empty means
/// index order.
double soft_e_step_voxel(std::span<const double> soft_votes, const RaterParams& params,
                         double prior, std::span<const std::size_t> order = {});

/// Monte Carlo estimate of soft_e_step_voxel from `samples` draws of B ~ q.
/// The stream is keyed by (seed, voxel), so results do not depend on which
/// worker evaluates the voxel.
double mc_soft_e_step_voxel(std::span<const double> soft_votes, const RaterParams& params,
                            double prior, std::size_t samples, std::uint64_t seed,
                            std::uint64_t voxel = 0, std::span<const std::size_t> order = {});

/// p(z | x = label) for one expert under the noisy-channel reading of a soft vote.
double noisy_channel_likelihood(double q1, int label, double sensitivity, double specificity);

/// Bayes posterior with per-expert noisy-channel likelihoods.
double simple_e_step_voxel(std::span<const double> soft_votes, const RaterParams& params,
                           double prior, std::span<const std::size_t> order = {});

VolumeGrid soft_e_step(const ExpertStack& stack, const RaterParams& params, double prior,
                       std::size_t threads = 1);
VolumeGrid simple_e_step(const ExpertStack& stack, const RaterParams& params, double prior,
                         std::size_t threads = 1);

/// Σ_t Σ_B q_t(B) log Σ_a p(B, x = a; θ).
double soft_log_likelihood(const ExpertStack& stack, const RaterParams& params, double prior,
                           std::size_t threads = 1);

/// Σ_t log Σ_a prior_a ∏_i p(z_it | x = a; θ).
double simple_log_likelihood(const ExpertStack& stack, const RaterParams& params, double prior,
                             std::size_t threads = 1);

/// One exact-soft E-step at θ followed by the update selected by `mode`
/// (unclamped).
RaterParams soft_m_step(const ExpertStack& stack, const RaterParams& params, double prior,
                        MStepMode mode, std::size_t threads = 1);

/// Same for the simplified model. ExpectedCount treats the hard vote as a
/// latent variable behind the noisy channel.
RaterParams simple_m_step(const ExpertStack& stack, const RaterParams& params, double prior,
                          MStepMode mode, std::size_t threads = 1);

/// EM loop for Variant::{kSoftExact, kSoftExactMC, kSimplified}.
FusionResult run_soft_em(const ExpertStack& stack, const FusionConfig& config);

}  // namespace fuselab
