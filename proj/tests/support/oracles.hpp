#pragma once

// Reference computations written straight from the model definitions with
// plain products and loops. Nothing here calls into the library's numerics.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

struct Theta {
  std::vector<double> sens;
  std::vector<double> spec;
};

/// p(votes | x = 1) and p(votes | x = 0) as direct products.
inline void hard_likelihoods(const std::vector<int>& votes, const Theta& th, double& l1, double& l0) {
  l1 = 1.0;
  l0 = 1.0;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    l1 *= votes[i] == 1 ? th.sens[i] : 1.0 - th.sens[i];
    l0 *= votes[i] == 1 ? 1.0 - th.spec[i] : th.spec[i];
  }
}

/// Bayes posterior of a lesion given hard votes.
inline double hard_posterior(const std::vector<int>& votes, const Theta& th, double prior) {
  double l1, l0;
  hard_likelihoods(votes, th, l1, l0);
  return prior * l1 / ((1.0 - prior) * l0 + prior * l1);
}

inline std::vector<int> bits_of(unsigned b, std::size_t m) {
  std::vector<int> v(m);
  for (std::size_t i = 0; i < m; ++i) v[i] = (b >> i) & 1u;
  return v;
}

inline double combination_weight(const std::vector<double>& q, const std::vector<int>& b) {
  double w = 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) w *= b[i] ? q[i] : 1.0 - q[i];
  return w;
}

/// Σ over all 2^m hard vote vectors B of q(B) · p(x=1 | B).
inline double soft_posterior(const std::vector<double>& q, const Theta& th, double prior) {
  const std::size_t m = q.size();
  double total = 0.0;
  for (unsigned b = 0; b < (1u << m); ++b) {
    const auto bits = bits_of(b, m);
    total += combination_weight(q, bits) * hard_posterior(bits, th, prior);
  }
  return total;
}

/// Posterior under the per-expert noisy-channel model.
inline double channel_posterior(const std::vector<double>& q, const Theta& th, double prior) {
  double l1 = 1.0, l0 = 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    l1 *= q[i] * th.sens[i] + (1.0 - q[i]) * (1.0 - th.sens[i]);
    l0 *= q[i] * (1.0 - th.spec[i]) + (1.0 - q[i]) * th.spec[i];
  }
  return prior * l1 / ((1.0 - prior) * l0 + prior * l1);
}

/// votes[t][i]
using VoteTable = std::vector<std::vector<double>>;

inline double hard_log_likelihood(const VoteTable& votes, const Theta& th, double prior) {
  double ll = 0.0;
  for (const auto& row : votes) {
    std::vector<int> v(row.begin(), row.end());
    double l1, l0;
    hard_likelihoods(v, th, l1, l0);
    ll += std::log((1.0 - prior) * l0 + prior * l1);
  }
  return ll;
}

inline double soft_log_likelihood(const VoteTable& q, const Theta& th, double prior) {
  double ll = 0.0;
  for (const auto& row : q) {
    const std::size_t m = row.size();
    for (unsigned b = 0; b < (1u << m); ++b) {
      const auto bits = bits_of(b, m);
      double l1, l0;
      hard_likelihoods(bits, th, l1, l0);
      ll += combination_weight(row, bits) * std::log((1.0 - prior) * l0 + prior * l1);
    }
  }
  return ll;
}

/// Expected complete-data counts M-step for the enumerated soft model.
inline Theta soft_expected_count_update(const VoteTable& q, const Theta& th, double prior) {
  const std::size_t m = th.sens.size();
  std::vector<double> num1(m, 0.0), num0(m, 0.0);
  double den1 = 0.0, den0 = 0.0;
  for (const auto& row : q) {
    for (unsigned b = 0; b < (1u << m); ++b) {
      const auto bits = bits_of(b, m);
      const double w = combination_weight(row, bits);
      const double p1 = hard_posterior(bits, th, prior);
      den1 += w * p1;
      den0 += w * (1.0 - p1);
      for (std::size_t i = 0; i < m; ++i) {
        num1[i] += w * p1 * bits[i];
        num0[i] += w * (1.0 - p1) * (1 - bits[i]);
      }
    }
  }
  Theta out;
  for (std::size_t i = 0; i < m; ++i) {
    out.sens.push_back(num1[i] / den1);
    out.spec.push_back(num0[i] / den0);
  }
  return out;
}

/// Binary update with votes (hard or soft) plugged in as y.
inline Theta plugin_update(const VoteTable& y, const std::vector<double>& w1) {
  const std::size_t m = y.front().size();
  Theta out;
  for (std::size_t i = 0; i < m; ++i) {
    double a = 0, b = 0, c = 0, d = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      a += y[t][i] * w1[t];
      b += w1[t];
      c += (1.0 - y[t][i]) * (1.0 - w1[t]);
      d += 1.0 - w1[t];
    }
    out.sens.push_back(a / b);
    out.spec.push_back(c / d);
  }
  return out;
}

/// Strict majority: more than half of the experts vote 1.
inline std::vector<double> majority_vote(const VoteTable& votes) {
  std::vector<double> out;
  for (const auto& row : votes) {
    double s = 0.0;
    for (double v : row) s += v;
    out.push_back(2.0 * s > static_cast<double>(row.size()) ? 1.0 : 0.0);
  }
  return out;
}

/// Dice of two binary masks by counting.
inline double binary_dice(const std::vector<double>& a, const std::vector<double>& b) {
  double inter = 0, sa = 0, sb = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    inter += a[t] * b[t];
    sa += a[t];
    sb += b[t];
  }
  if (sa + sb == 0.0) return 1.0;
  return 2.0 * inter / (sa + sb);
}

}  // namespace oracle
