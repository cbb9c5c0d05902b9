#include "em_engine.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fuselab/errors.hpp"
#include "fuselab/parallel.hpp"
#include "fuselab/philox.hpp"
#include "fuselab/simd/kernels.hpp"

namespace fuselab::detail {

LogModel::LogModel(const RaterParams& params, double prior) {
  const std::size_t m = params.size();
  sens.resize(m);
  spec.resize(m);
  l1_one.resize(m);
  l1_zero.resize(m);
  l0_one.resize(m);
  l0_zero.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    sens[i] = clamp_probability(params[i].sensitivity);
    spec[i] = clamp_probability(params[i].specificity);
    l1_one[i] = std::log(sens[i]);
    l1_zero[i] = std::log(1.0 - sens[i]);
    l0_one[i] = std::log(1.0 - spec[i]);
    l0_zero[i] = std::log(spec[i]);
  }
  const double p = clamp_probability(prior);
  log_prior1 = std::log(p);
  log_prior0 = std::log(1.0 - p);
}

std::vector<std::size_t> resolve_order(std::span<const std::size_t> order, std::size_t m) {
  if (order.empty()) {
    std::vector<std::size_t> id(m);
    std::iota(id.begin(), id.end(), std::size_t{0});
    return id;
  }
  if (order.size() != m) throw Error("expert order length does not match expert count");
  return {order.begin(), order.end()};
}

RaterParams canonical_params(const RaterParams& params, std::span<const std::size_t> order) {
  RaterParams out;
  for (std::size_t i : order) out.raters.push_back(params[i]);
  return out;
}

std::vector<double> canonical_votes(std::span<const double> q, std::span<const std::size_t> order) {
  std::vector<double> out;
  out.reserve(q.size());
  for (std::size_t i : order) out.push_back(q[i]);
  return out;
}

void combination_log_sums(const LogModel& lm, std::span<const std::size_t> order,
                          VoteCombination b, double& s0, double& s1) {
  s0 = 0.0;
  s1 = 0.0;
  for (std::size_t i : order) {
    const bool vote = (b >> i) & 1u;
    s1 += vote ? lm.l1_one[i] : lm.l1_zero[i];
    s0 += vote ? lm.l0_one[i] : lm.l0_zero[i];
  }
}

CombinationTables combination_tables(const LogModel& lm, std::span<const std::size_t> order) {
  const std::size_t count = std::size_t{1} << lm.size();
  CombinationTables t;
  t.post1.resize(count);
  t.post0.resize(count);
  t.evidence.resize(count);
  for (std::size_t b = 0; b < count; ++b) {
    double s0 = 0.0, s1 = 0.0;
    combination_log_sums(lm, order, static_cast<VoteCombination>(b), s0, s1);
    t.post1[b] = posterior_from_logs(s0, s1, lm);
    t.post0[b] = 1.0 - t.post1[b];
    t.evidence[b] = log_evidence(s0, s1, lm);
  }
  return t;
}

void build_joint_table(std::span<const double> q, std::span<double> table) {
  table[0] = 1.0;
  std::size_t filled = 1;
  for (double q1 : q) {
    const double q0 = 1.0 - q1;
    for (std::size_t b = 0; b < filled; ++b) {
      table[b + filled] = table[b] * q1;
      table[b] = table[b] * q0;
    }
    filled *= 2;
  }
}

double masked_sum(std::span<const double> table, std::size_t bit, bool value) {
  double s = 0.0;
  const std::size_t mask = std::size_t{1} << bit;
  for (std::size_t b = 0; b < table.size(); ++b) {
    if (((b & mask) != 0) == value) s += table[b];
  }
  return s;
}

VoteCombination draw_combination(std::span<const double> q, std::uint64_t seed, std::uint64_t voxel,
                                 std::uint32_t sample) {
  const auto key = Philox4x32::key_of(seed);
  VoteCombination b = 0;
  for (std::size_t block = 0; block * 4 < q.size(); ++block) {
    const auto out = Philox4x32::generate(
        {sample, static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(voxel),
         static_cast<std::uint32_t>(voxel >> 32)},
        key);
    for (std::size_t l = 0; l < 4 && block * 4 + l < q.size(); ++l) {
      const std::size_t i = block * 4 + l;
      if (open_uniform32(out[l]) < q[i]) b |= VoteCombination{1} << i;
    }
  }
  return b;
}

void check_guard(std::size_t m) {
  if (m > kEnumerationGuard) {
    throw CapacityError("exact soft enumeration needs 2^" + std::to_string(m) +
                        " terms per voxel; m=" + std::to_string(m) + " exceeds the guard of " +
                        std::to_string(kEnumerationGuard) + " experts, use soft-mc instead");
  }
}

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

struct Reducer {
  std::size_t n;
  std::size_t threads;
  const simd::KernelTable& k;

  double sum(const std::vector<double>& x) const {
    return reduce_ranges(n, threads, [&](Range r) { return k.sum(x.data() + r.begin, r.size()); });
  }
  double dot(std::span<const double> x, const std::vector<double>& y) const {
    return reduce_ranges(n, threads,
                         [&](Range r) { return k.dot(x.data() + r.begin, y.data() + r.begin, r.size()); });
  }
  double dot_complement(std::span<const double> y, const std::vector<double>& w) const {
    return reduce_ranges(n, threads, [&](Range r) {
      return k.dot_complement(y.data() + r.begin, w.data() + r.begin, r.size());
    });
  }
};

/// Shared tail of every pass: w0, posterior sums, plug-in statistics, objective.
void finish_pass(const ExpertStack& stack, const PassOptions& opt, const Reducer& red,
                 const std::vector<double>& w0, const std::vector<double>& ll,
                 std::vector<std::vector<double>>* c_sens, std::vector<std::vector<double>>* c_spec,
                 PassResult& out) {
  const std::size_t m = stack.size();
  out.sum_w1 = red.sum(out.w1);
  out.sum_w0 = red.sum(w0);
  if (opt.contributions) {
    out.sens_num.assign(m, 0.0);
    out.spec_num.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (c_sens != nullptr) {
        out.sens_num[i] = red.sum((*c_sens)[i]);
        out.spec_num[i] = red.sum((*c_spec)[i]);
      } else {
        const auto votes = stack.experts[i].values();
        out.sens_num[i] = red.dot(votes, out.w1);
        out.spec_num[i] = red.dot_complement(votes, w0);
      }
    }
  }
  if (opt.objective) out.objective = red.sum(ll);
}

}  // namespace

PassResult binary_pass(const ExpertStack& stack, std::span<const std::size_t> order,
                       const RaterParams& params, double prior, const PassOptions& opt) {
  const auto& k = simd::kernels();
  const std::size_t n = stack.voxel_count();
  const LogModel lm(params, prior);

  PassResult out;
  out.w1.resize(n);
  std::vector<double> s0(n, 0.0), s1(n, 0.0), w0(n), ll(opt.objective ? n : 0);

  parallel_ranges(n, opt.threads, [&](std::size_t, Range r) {
    for (std::size_t i : order) {
      const double* y = stack.experts[i].values().data() + r.begin;
      k.add_select(s1.data() + r.begin, y, lm.l1_one[i], lm.l1_zero[i], r.size());
      k.add_select(s0.data() + r.begin, y, lm.l0_one[i], lm.l0_zero[i], r.size());
    }
    for (std::size_t t = r.begin; t < r.end; ++t) {
      out.w1[t] = posterior_from_logs(s0[t], s1[t], lm);
      if (opt.objective) ll[t] = log_evidence(s0[t], s1[t], lm);
    }
    k.complement(w0.data() + r.begin, out.w1.data() + r.begin, r.size());
  });

  finish_pass(stack, opt, Reducer{n, opt.threads, k}, w0, ll, nullptr, nullptr, out);
  return out;
}

PassResult soft_exact_pass(const ExpertStack& stack, std::span<const std::size_t> order,
                           const RaterParams& params, double prior, const PassOptions& opt) {
  const std::size_t m = stack.size();
  check_guard(m);
  const auto& k = simd::kernels();
  const std::size_t n = stack.voxel_count();
  const std::size_t combos = std::size_t{1} << m;
  const LogModel lm(canonical_params(params, order), prior);
  const auto canon = resolve_order({}, m);
  const CombinationTables tables = combination_tables(lm, canon);
  const bool expected = opt.contributions && opt.mode == MStepMode::kExpectedCount;

  PassResult out;
  out.w1.resize(n);
  std::vector<double> w0(n), ll(opt.objective ? n : 0);
  std::vector<std::vector<double>> c_sens, c_spec;
  if (expected) {
    c_sens.assign(m, std::vector<double>(n));
    c_spec.assign(m, std::vector<double>(n));
  }

  parallel_ranges(n, opt.threads, [&](std::size_t, Range r) {
    std::vector<double> q(m), joint(combos), r1(expected ? combos : 0), r0(expected ? combos : 0);
    for (std::size_t t = r.begin; t < r.end; ++t) {
      for (std::size_t j = 0; j < m; ++j) q[j] = stack.experts[order[j]][t];
      build_joint_table(q, joint);
      out.w1[t] = clamp01(k.dot(joint.data(), tables.post1.data(), combos));
      if (opt.objective) ll[t] = k.dot(joint.data(), tables.evidence.data(), combos);
      if (expected) {
        k.mul(r1.data(), joint.data(), tables.post1.data(), combos);
        k.mul(r0.data(), joint.data(), tables.post0.data(), combos);
        for (std::size_t j = 0; j < m; ++j) {
          c_sens[order[j]][t] = masked_sum(r1, j, true);
          c_spec[order[j]][t] = masked_sum(r0, j, false);
        }
      }
    }
    k.complement(w0.data() + r.begin, out.w1.data() + r.begin, r.size());
  });

  finish_pass(stack, opt, Reducer{n, opt.threads, k}, w0, ll, expected ? &c_sens : nullptr,
              expected ? &c_spec : nullptr, out);
  return out;
}

PassResult mc_pass(const ExpertStack& stack, std::span<const std::size_t> order,
                   const RaterParams& params, double prior, const PassOptions& opt) {
  const std::size_t m = stack.size();
  const auto& k = simd::kernels();
  const std::size_t n = stack.voxel_count();
  const LogModel lm(canonical_params(params, order), prior);
  const auto canon = resolve_order({}, m);
  const bool tabulate = m <= kEnumerationGuard;
  const CombinationTables tables = tabulate ? combination_tables(lm, canon) : CombinationTables{};
  const bool expected = opt.contributions && opt.mode == MStepMode::kExpectedCount;

  PassResult out;
  out.w1.resize(n);
  out.objective_approximate = opt.objective && !tabulate;
  std::vector<double> w0(n), ll(opt.objective ? n : 0);
  std::vector<std::vector<double>> c_sens, c_spec;
  if (expected) {
    c_sens.assign(m, std::vector<double>(n));
    c_spec.assign(m, std::vector<double>(n));
  }

  parallel_ranges(n, opt.threads, [&](std::size_t, Range r) {
    std::vector<double> q(m), mean_s(m), mean_c(m);
    std::vector<double> joint(tabulate && opt.objective ? (std::size_t{1} << m) : 0);
    for (std::size_t t = r.begin; t < r.end; ++t) {
      for (std::size_t j = 0; j < m; ++j) q[j] = stack.experts[order[j]][t];
      std::fill(mean_s.begin(), mean_s.end(), 0.0);
      std::fill(mean_c.begin(), mean_c.end(), 0.0);
      double mean_w = 0.0, mean_ll = 0.0;
      // Running means stay exact when every draw is identical.
      for (std::size_t s = 0; s < opt.mc_samples; ++s) {
        const VoteCombination b = draw_combination(q, opt.mc_seed, t, static_cast<std::uint32_t>(s));
        double p1, p0, ev = 0.0;
        if (tabulate) {
          p1 = tables.post1[b];
          p0 = tables.post0[b];
          ev = tables.evidence[b];
        } else {
          double s0, s1;
          combination_log_sums(lm, canon, b, s0, s1);
          p1 = posterior_from_logs(s0, s1, lm);
          p0 = 1.0 - p1;
          if (opt.objective) ev = log_evidence(s0, s1, lm);
        }
        const double inv = 1.0 / static_cast<double>(s + 1);
        mean_w += (p1 - mean_w) * inv;
        if (out.objective_approximate) mean_ll += (ev - mean_ll) * inv;
        if (expected) {
          for (std::size_t i = 0; i < m; ++i) {
            const bool vote = (b >> i) & 1u;
            mean_s[i] += ((vote ? p1 : 0.0) - mean_s[i]) * inv;
            mean_c[i] += ((vote ? 0.0 : p0) - mean_c[i]) * inv;
          }
        }
      }
      out.w1[t] = clamp01(mean_w);
      if (expected) {
        for (std::size_t j = 0; j < m; ++j) {
          c_sens[order[j]][t] = mean_s[j];
          c_spec[order[j]][t] = mean_c[j];
        }
      }
      if (opt.objective) {
        if (tabulate) {
          build_joint_table(q, joint);
          ll[t] = k.dot(joint.data(), tables.evidence.data(), joint.size());
        } else {
          ll[t] = mean_ll;
        }
      }
    }
    k.complement(w0.data() + r.begin, out.w1.data() + r.begin, r.size());
  });

  finish_pass(stack, opt, Reducer{n, opt.threads, k}, w0, ll, expected ? &c_sens : nullptr,
              expected ? &c_spec : nullptr, out);
  return out;
}

PassResult simplified_pass(const ExpertStack& stack, std::span<const std::size_t> order,
                           const RaterParams& params, double prior, const PassOptions& opt) {
  const std::size_t m = stack.size();
  const auto& k = simd::kernels();
  const std::size_t n = stack.voxel_count();
  const LogModel lm(params, prior);
  const bool expected = opt.contributions && opt.mode == MStepMode::kExpectedCount;

  PassResult out;
  out.w1.resize(n);
  std::vector<double> s0(n, 0.0), s1(n, 0.0), w0(n), ll(opt.objective ? n : 0);
  std::vector<std::vector<double>> c_sens, c_spec;
  if (expected) {
    c_sens.assign(m, std::vector<double>(n));
    c_spec.assign(m, std::vector<double>(n));
  }

  parallel_ranges(n, opt.threads, [&](std::size_t, Range r) {
    std::vector<double> channel(r.size());
    for (std::size_t i : order) {
      const double* q = stack.experts[i].values().data() + r.begin;
      k.mix(channel.data(), q, lm.sens[i], 1.0 - lm.sens[i], r.size());
      for (double& c : channel) c = std::log(c);
      k.add(s1.data() + r.begin, channel.data(), r.size());
      k.mix(channel.data(), q, 1.0 - lm.spec[i], lm.spec[i], r.size());
      for (double& c : channel) c = std::log(c);
      k.add(s0.data() + r.begin, channel.data(), r.size());
    }
    for (std::size_t t = r.begin; t < r.end; ++t) {
      out.w1[t] = posterior_from_logs(s0[t], s1[t], lm);
      if (opt.objective) ll[t] = log_evidence(s0[t], s1[t], lm);
    }
    k.complement(w0.data() + r.begin, out.w1.data() + r.begin, r.size());
    if (expected) {
      // Posterior of the hidden hard vote given x and the channel observation.
      for (std::size_t i = 0; i < m; ++i) {
        const double sens = lm.sens[i];
        const double spec = lm.spec[i];
        for (std::size_t t = r.begin; t < r.end; ++t) {
          const double q = stack.experts[i][t];
          const double a1 = q * sens;
          const double b1 = (1.0 - q) * (1.0 - sens);
          c_sens[i][t] = out.w1[t] * (a1 / (a1 + b1));
          const double a0 = q * (1.0 - spec);
          const double b0 = (1.0 - q) * spec;
          c_spec[i][t] = w0[t] * (b0 / (a0 + b0));
        }
      }
    }
  });

  finish_pass(stack, opt, Reducer{n, opt.threads, k}, w0, ll, expected ? &c_sens : nullptr,
              expected ? &c_spec : nullptr, out);
  return out;
}

RaterParams update_from(const PassResult& pass) {
  if (!(pass.sum_w1 > 0.0)) throw DegeneratePosterior(DegeneratePosterior::Side::kSensitivity);
  if (!(pass.sum_w0 > 0.0)) throw DegeneratePosterior(DegeneratePosterior::Side::kSpecificity);
  RaterParams next;
  next.raters.resize(pass.sens_num.size());
  for (std::size_t i = 0; i < pass.sens_num.size(); ++i) {
    next[i].sensitivity = std::min(1.0, std::max(0.0, pass.sens_num[i] / pass.sum_w1));
    next[i].specificity = std::min(1.0, std::max(0.0, pass.spec_num[i] / pass.sum_w0));
  }
  return next;
}

FusionResult run_loop(const ExpertStack& stack, const FusionConfig& config, double prior,
                      const PassFn& pass) {
  const std::size_t m = stack.size();
  RaterParams theta =
      clamped(RaterParams::uniform(m, config.init_sensitivity, config.init_specificity));
  PassResult current = pass(theta);

  FusionResult result;
  result.prior = prior;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    RaterParams next;
    try {
      next = clamped(update_from(current));
    } catch (DegeneratePosterior& e) {
      e.set_partial_trace(result.ll_trace);
      throw;
    }
    const double delta = max_abs_change(next, theta);
    PassResult updated = pass(next);
    result.ll_trace.push_back(updated.objective);
    result.iters_run = iter + 1;
    if (config.observer) {
      config.observer(IterationState{iter, current.w1, &next, updated.objective});
    }
    theta = std::move(next);
    current = std::move(updated);
    if (delta < config.tol) {
      result.converged = true;
      break;
    }
  }

  result.objective_approximate = current.objective_approximate;
  result.params = std::move(theta);
  result.posterior = VolumeGrid(stack.dims(), VoxelKind::kPosterior, std::move(current.w1));
  return result;
}

}  // namespace fuselab::detail
