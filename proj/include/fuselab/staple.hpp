#pragma once

#include <cstddef>
#include <span>

#include "fuselab/fusion.hpp"
#include "fuselab/volume.hpp"

namespace fuselab {

// Classic binary STAPLE. Per-voxel functions take votes in the same order as
// params; an optional `order` fixes the expert summation order (grid-level
// functions pass expert_order(stack)).

/// ∏_i p(vote_i | x = label; θ), accumulated as a sum of logs.
double annotation_likelihood(std::span<const double> votes, int label, const RaterParams& params);

/// p(x = 1 | votes; θ) by Bayes' rule, via a log-odds logistic.
double posterior_voxel(std::span<const double> votes, const RaterParams& params, double prior,
                       std::span<const std::size_t> order = {});

VolumeGrid e_step(const ExpertStack& stack, const RaterParams& params, double prior,
                  std::size_t threads = 1);

/// Unclamped closed-form update. Throws DegeneratePosterior when either
/// posterior class has zero mass.
RaterParams m_step(const ExpertStack& stack, const VolumeGrid& posterior, std::size_t threads = 1);

double log_likelihood(const ExpertStack& stack, const RaterParams& params, double prior,
                      std::size_t threads = 1);

FusionResult run_em(const ExpertStack& stack, const FusionConfig& config);

/// w(1) > 0.5 → 1; ties resolve to 0.
VolumeGrid binarize(const VolumeGrid& posterior, double threshold = 0.5);

}  // namespace fuselab
