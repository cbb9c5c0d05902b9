#include "fuselab/soft_staple.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "em_engine.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/simd/kernels.hpp"

namespace fuselab {
namespace {

void require_soft(const ExpertStack& stack) {
  validate_stack(stack);
  if (stack.kind() != VoxelKind::kSoftLabel) {
    throw ValidationError(ValidationError::Reason::kUnsupportedKind,
                          "soft fusion needs soft annotations");
  }
}

void require_match(std::size_t votes, const RaterParams& params) {
  if (votes != params.size()) {
    throw ValidationError(ValidationError::Reason::kSizeMismatch,
                          "got " + std::to_string(votes) + " soft votes for " +
                              std::to_string(params.size()) + " raters");
  }
}

void require_probabilities(std::span<const double> q) {
  for (double v : q) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError(ValidationError::Reason::kRangeViolation,
                            "soft vote " + std::to_string(v) + " outside [0,1]");
    }
  }
}

detail::PassOptions pass_options(std::size_t threads, bool contributions, bool objective,
                                 MStepMode mode = MStepMode::kExpectedCount) {
  detail::PassOptions opt;
  opt.threads = threads;
  opt.contributions = contributions;
  opt.objective = objective;
  opt.mode = mode;
  return opt;
}

}  // namespace

double joint_soft_prob(std::span<const double> soft_votes, VoteCombination combination) {
  require_probabilities(soft_votes);
  double p = 1.0;
  for (std::size_t i = 0; i < soft_votes.size(); ++i) {
    p *= ((combination >> i) & 1u) ? soft_votes[i] : 1.0 - soft_votes[i];
  }
  return p;
}

double soft_e_step_voxel(std::span<const double> soft_votes, const RaterParams& params,
                         double prior, std::span<const std::size_t> order) {
  const std::size_t m = soft_votes.size();
  require_match(m, params);
  require_probabilities(soft_votes);
  detail::check_guard(m);
  const auto ord = detail::resolve_order(order, m);
  const detail::LogModel lm(detail::canonical_params(params, ord), prior);
  const auto tables = detail::combination_tables(lm, detail::resolve_order({}, m));
  std::vector<double> joint(tables.post1.size());
  detail::build_joint_table(detail::canonical_votes(soft_votes, ord), joint);
  const double w = simd::kernels().dot(joint.data(), tables.post1.data(), joint.size());
  return std::min(1.0, std::max(0.0, w));
}

double mc_soft_e_step_voxel(std::span<const double> soft_votes, const RaterParams& params,
                            double prior, std::size_t samples, std::uint64_t seed,
                            std::uint64_t voxel, std::span<const std::size_t> order) {
  const std::size_t m = soft_votes.size();
  require_match(m, params);
  require_probabilities(soft_votes);
  if (samples < 1) {
    throw ValidationError(ValidationError::Reason::kBadConfig, "MC needs at least one sample");
  }
  const auto ord = detail::resolve_order(order, m);
  const detail::LogModel lm(detail::canonical_params(params, ord), prior);
  const auto canon = detail::resolve_order({}, m);
  const auto q = detail::canonical_votes(soft_votes, ord);
  double mean = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto b = detail::draw_combination(q, seed, voxel, static_cast<std::uint32_t>(s));
    double s0, s1;
    detail::combination_log_sums(lm, canon, b, s0, s1);
    const double p = detail::posterior_from_logs(s0, s1, lm);
    mean += (p - mean) * (1.0 / static_cast<double>(s + 1));
  }
  return std::min(1.0, std::max(0.0, mean));
}

double noisy_channel_likelihood(double q1, int label, double sensitivity, double specificity) {
  if (label == 1) {
    const double a = q1 * sensitivity;
    const double b = (1.0 - q1) * (1.0 - sensitivity);
    return a + b;
  }
  const double a = q1 * (1.0 - specificity);
  const double b = (1.0 - q1) * specificity;
  return a + b;
}

double simple_e_step_voxel(std::span<const double> soft_votes, const RaterParams& params,
                           double prior, std::span<const std::size_t> order) {
  const std::size_t m = soft_votes.size();
  require_match(m, params);
  require_probabilities(soft_votes);
  const detail::LogModel lm(params, prior);
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t i : detail::resolve_order(order, m)) {
    s1 += std::log(noisy_channel_likelihood(soft_votes[i], 1, lm.sens[i], lm.spec[i]));
    s0 += std::log(noisy_channel_likelihood(soft_votes[i], 0, lm.sens[i], lm.spec[i]));
  }
  return detail::posterior_from_logs(s0, s1, lm);
}

VolumeGrid soft_e_step(const ExpertStack& stack, const RaterParams& params, double prior,
                       std::size_t threads) {
  require_soft(stack);
  require_match(stack.size(), params);
  auto pass = detail::soft_exact_pass(stack, expert_order(stack), params, prior,
                                      pass_options(threads, false, false));
  return VolumeGrid(stack.dims(), VoxelKind::kPosterior, std::move(pass.w1));
}

VolumeGrid simple_e_step(const ExpertStack& stack, const RaterParams& params, double prior,
                         std::size_t threads) {
  require_soft(stack);
  require_match(stack.size(), params);
  auto pass = detail::simplified_pass(stack, expert_order(stack), params, prior,
                                      pass_options(threads, false, false));
  return VolumeGrid(stack.dims(), VoxelKind::kPosterior, std::move(pass.w1));
}

double soft_log_likelihood(const ExpertStack& stack, const RaterParams& params, double prior,
                           std::size_t threads) {
  require_soft(stack);
  require_match(stack.size(), params);
  return detail::soft_exact_pass(stack, expert_order(stack), params, prior,
                                 pass_options(threads, false, true))
      .objective;
}

double simple_log_likelihood(const ExpertStack& stack, const RaterParams& params, double prior,
                             std::size_t threads) {
  require_soft(stack);
  require_match(stack.size(), params);
  return detail::simplified_pass(stack, expert_order(stack), params, prior,
                                 pass_options(threads, false, true))
      .objective;
}

RaterParams soft_m_step(const ExpertStack& stack, const RaterParams& params, double prior,
                        MStepMode mode, std::size_t threads) {
  require_soft(stack);
  require_match(stack.size(), params);
  return detail::update_from(detail::soft_exact_pass(stack, expert_order(stack), params, prior,
                                                     pass_options(threads, true, false, mode)));
}

RaterParams simple_m_step(const ExpertStack& stack, const RaterParams& params, double prior,
                          MStepMode mode, std::size_t threads) {
  require_soft(stack);
  require_match(stack.size(), params);
  return detail::update_from(detail::simplified_pass(stack, expert_order(stack), params, prior,
                                                     pass_options(threads, true, false, mode)));
}

FusionResult run_soft_em(const ExpertStack& stack, const FusionConfig& config) {
  config.validate();
  require_soft(stack);
  if (config.variant == Variant::kBinary) {
    throw ValidationError(ValidationError::Reason::kBadConfig,
                          "run_soft_em handles the soft variants only");
  }
  if (config.variant == Variant::kSoftExact) detail::check_guard(stack.size());

  const double prior = resolve_prior(stack, config.prior);
  const auto order = expert_order(stack);
  detail::PassOptions opt = pass_options(config.threads, true, true, config.mstep_mode);
  opt.mc_samples = config.mc_samples;
  opt.mc_seed = config.mc_seed;

  detail::PassFn pass;
  switch (config.variant) {
    case Variant::kSoftExact:
      pass = [&](const RaterParams& theta) {
        return detail::soft_exact_pass(stack, order, theta, prior, opt);
      };
      break;
    case Variant::kSoftExactMC:
      pass = [&](const RaterParams& theta) {
        return detail::mc_pass(stack, order, theta, prior, opt);
      };
      break;
    default:
      pass = [&](const RaterParams& theta) {
        return detail::simplified_pass(stack, order, theta, prior, opt);
      };
      break;
  }
  return detail::run_loop(stack, config, prior, pass);
}

}  // namespace fuselab
