#include "fuselab/staple.hpp"

#include <cmath>
#include <string>

#include "em_engine.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/parallel.hpp"
#include "fuselab/simd/kernels.hpp"

namespace fuselab {
namespace {

void require_binary(const ExpertStack& stack) {
  validate_stack(stack);
  if (stack.kind() != VoxelKind::kBinaryLabel) {
    throw ValidationError(ValidationError::Reason::kUnsupportedKind,
                          "binary STAPLE needs binary annotations");
  }
}

void require_match(std::size_t votes, const RaterParams& params) {
  if (votes != params.size()) {
    throw ValidationError(ValidationError::Reason::kSizeMismatch,
                          "got " + std::to_string(votes) + " votes for " +
                              std::to_string(params.size()) + " raters");
  }
}

}  // namespace

double annotation_likelihood(std::span<const double> votes, int label, const RaterParams& params) {
  require_match(votes.size(), params);
  double log_l = 0.0;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const double sens = params[i].sensitivity;
    const double spec = params[i].specificity;
    const bool vote = votes[i] == 1.0;
    const double p = label == 1 ? (vote ? sens : 1.0 - sens) : (vote ? 1.0 - spec : spec);
    log_l += std::log(p);
  }
  return std::exp(log_l);
}

double posterior_voxel(std::span<const double> votes, const RaterParams& params, double prior,
                       std::span<const std::size_t> order) {
  require_match(votes.size(), params);
  const detail::LogModel lm(params, prior);
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t i : detail::resolve_order(order, votes.size())) {
    const bool vote = votes[i] == 1.0;
    s1 += vote ? lm.l1_one[i] : lm.l1_zero[i];
    s0 += vote ? lm.l0_one[i] : lm.l0_zero[i];
  }
  return detail::posterior_from_logs(s0, s1, lm);
}

VolumeGrid e_step(const ExpertStack& stack, const RaterParams& params, double prior,
                  std::size_t threads) {
  require_binary(stack);
  require_match(stack.size(), params);
  const auto order = expert_order(stack);
  detail::PassOptions opt;
  opt.contributions = false;
  opt.objective = false;
  opt.threads = threads;
  auto pass = detail::binary_pass(stack, order, params, prior, opt);
  return VolumeGrid(stack.dims(), VoxelKind::kPosterior, std::move(pass.w1));
}

RaterParams m_step(const ExpertStack& stack, const VolumeGrid& posterior, std::size_t threads) {
  require_binary(stack);
  if (!(posterior.dims() == stack.dims())) {
    throw ValidationError(ValidationError::Reason::kDimensionMismatch,
                          "posterior dims " + to_string(posterior.dims()) +
                              " differ from stack dims " + to_string(stack.dims()));
  }
  posterior.validate();
  // Reuse the pass reductions with the given posterior in place of an E-step.
  const auto& k = simd::kernels();
  const std::size_t n = stack.voxel_count();
  detail::PassResult pass;
  pass.w1.assign(posterior.values().begin(), posterior.values().end());
  std::vector<double> w0(n);
  k.complement(w0.data(), pass.w1.data(), n);
  auto sum = [&](const std::vector<double>& x) {
    return reduce_ranges(n, threads, [&](Range r) { return k.sum(x.data() + r.begin, r.size()); });
  };
  pass.sum_w1 = sum(pass.w1);
  pass.sum_w0 = sum(w0);
  pass.sens_num.resize(stack.size());
  pass.spec_num.resize(stack.size());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const double* y = stack.experts[i].values().data();
    pass.sens_num[i] = reduce_ranges(
        n, threads, [&](Range r) { return k.dot(y + r.begin, pass.w1.data() + r.begin, r.size()); });
    pass.spec_num[i] = reduce_ranges(n, threads, [&](Range r) {
      return k.dot_complement(y + r.begin, w0.data() + r.begin, r.size());
    });
  }
  return detail::update_from(pass);
}

double log_likelihood(const ExpertStack& stack, const RaterParams& params, double prior,
                      std::size_t threads) {
  require_binary(stack);
  require_match(stack.size(), params);
  const auto order = expert_order(stack);
  detail::PassOptions opt;
  opt.contributions = false;
  opt.threads = threads;
  return detail::binary_pass(stack, order, params, prior, opt).objective;
}

FusionResult run_em(const ExpertStack& stack, const FusionConfig& config) {
  config.validate();
  require_binary(stack);
  if (config.variant != Variant::kBinary) {
    throw ValidationError(ValidationError::Reason::kBadConfig,
                          "run_em handles the binary variant only");
  }
  const double prior = resolve_prior(stack, config.prior);
  const auto order = expert_order(stack);
  detail::PassOptions opt;
  opt.threads = config.threads;
  return detail::run_loop(stack, config, prior, [&](const RaterParams& theta) {
    return detail::binary_pass(stack, order, theta, prior, opt);
  });
}

VolumeGrid binarize(const VolumeGrid& posterior, double threshold) {
  std::vector<double> out(posterior.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = posterior[t] > threshold ? 1.0 : 0.0;
  return VolumeGrid(posterior.dims(), VoxelKind::kBinaryLabel, std::move(out));
}

}  // namespace fuselab
