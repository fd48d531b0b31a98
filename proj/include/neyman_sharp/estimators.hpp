#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "neyman_sharp/contrasts.hpp"
#include "neyman_sharp/design.hpp"
#include "neyman_sharp/normal.hpp"
#include "neyman_sharp/potential_outcomes.hpp"

namespace neyman_sharp {

// Randomization-based estimation for 2x2 factorial designs with binary
// outcomes. The point estimator is half a +/-1 contrast of the four arm
// means. Its sampling variance over the randomization distribution is
//   Var = (1/4) sum_j S_j^2 / n_j - S^2(tau_l) / N,
// where S^2(tau_l), the variance of the unit-level effects, is not
// identifiable from observed data. The classic Neymanian estimator drops
// that term (bounding it by 0) and is conservative; the improved estimator
// subtracts the plug-in of the sharp lower bound
//   S_LB^2(tau_l) = N/(N-1) * max{ |tau_l| (1/2 - |tau_l|), 0 },
// which is the best bound computable from the arm margins alone.

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double length() const { return upper - lower; }
  bool contains(double x) const { return lower <= x && x <= upper; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// tau_l = (1/2) h_l' p.
inline double population_effect(const std::array<double, 4>& arm_probs, int l) {
  const auto& h = contrast(l).h;
  double acc = 0.0;
  for (int j = 0; j < 4; ++j) {
    acc += h[static_cast<std::size_t>(j)] * arm_probs[static_cast<std::size_t>(j)];
  }
  return 0.5 * acc;
}

// tauhat_l = (1/2) h_l' phat; unbiased over the randomization distribution.
inline double estimate_effect(const ObservedSummary& obs, int l) {
  return population_effect(obs.arm_means(), l);
}

// Classic Neymanian variance estimator, (1/4) sum_j phat_j(1-phat_j)/(n_j-1).
// The same value serves every effect index.
inline double classic_variance(const ObservedSummary& obs) {
  double acc = 0.0;
  for (int j = 0; j < 4; ++j) {
    const auto js = static_cast<std::size_t>(j);
    if (obs.arm_sizes[js] < 2) {
      throw std::invalid_argument("classic_variance: arm sizes must be at least 2");
    }
    const double p = obs.arm_mean(j);
    acc += p * (1.0 - p) / static_cast<double>(obs.arm_sizes[js] - 1);
  }
  return 0.25 * acc;
}

// Sharp lower bound on S^2(tau_l) given only tau_l and N. Symmetric in
// tau <-> -tau, zero at tau = 0 and for |tau| >= 1/2, maximal at |tau| = 1/4.
inline double sharp_lower_bound(double tau, std::int64_t n) {
  if (n < 2) throw std::invalid_argument("sharp_lower_bound: N must be at least 2");
  if (std::fabs(tau) > 1.0) throw std::invalid_argument("sharp_lower_bound: |tau| must not exceed 1");
  const double a = std::fabs(tau);
  return static_cast<double>(n) / static_cast<double>(n - 1) * std::max(a * (0.5 - a), 0.0);
}

// Plug-in correction S_LB^2(tauhat)/N = max{|tauhat|(1/2-|tauhat|), 0}/(N-1).
inline double lower_bound_correction(double tau_hat, std::int64_t n) {
  if (n < 2) throw std::invalid_argument("lower_bound_correction: N must be at least 2");
  const double a = std::fabs(tau_hat);
  return std::max(a * (0.5 - a), 0.0) / static_cast<double>(n - 1);
}

// Improved Neymanian variance estimator: classic minus the plug-in of the
// sharp bound. Never exceeds the classic estimator; floored at zero because
// with tiny arms the correction can overshoot and a negative variance
// estimate is meaningless.
inline double improved_variance(const ObservedSummary& obs, int l) {
  const double classic = classic_variance(obs);
  const double corr = lower_bound_correction(estimate_effect(obs, l), obs.n_total());
  return std::max(classic - corr, 0.0);
}

// Wald interval point +/- z * sqrt(variance).
inline Interval confidence_interval(double point, double variance, double level) {
  if (variance < 0.0) throw std::invalid_argument("confidence_interval: negative variance");
  const double half = critical_value(level) * std::sqrt(variance);
  return {point - half, point + half};
}

// Exact sampling variance of the effect estimator for a known science table.
inline double true_sampling_variance(const JointDistribution& joint, const Design& design,
                                     int l) {
  const std::int64_t n = joint.total();
  if (n != design.n_total) {
    throw std::invalid_argument("true_sampling_variance: joint total differs from design size");
  }
  if (n < 2) throw std::invalid_argument("true_sampling_variance: N must be at least 2");
  const auto m = marginal_counts(joint);
  double arm_term = 0.0;
  for (int j = 0; j < 4; ++j) {
    const auto js = static_cast<std::size_t>(j);
    // S_j^2 = N/(N-1) p_j (1-p_j) = N_j (N - N_j) / (N (N-1)).
    const double s2j = static_cast<double>(m[js]) * static_cast<double>(n - m[js]) /
                       (static_cast<double>(n) * static_cast<double>(n - 1));
    arm_term += s2j / static_cast<double>(design.arm_sizes[js]);
  }
  return 0.25 * arm_term - s2_tau_lemma1(joint, l) / static_cast<double>(n);
}

// Average over-estimation of the classic estimator: E[classic] - Var equals
// S^2(tau_l)/N exactly. The relative version is undefined when the true
// variance vanishes.
struct OverEstimation {
  double absolute = 0.0;
  std::optional<double> relative;
};

inline OverEstimation expected_overestimation(const JointDistribution& joint,
                                              const Design& design, int l) {
  const std::int64_t n = joint.total();
  if (n != design.n_total) {
    throw std::invalid_argument("expected_overestimation: joint total differs from design size");
  }
  OverEstimation result;
  result.absolute = s2_tau_lemma1(joint, l) / static_cast<double>(n);
  const double truth = true_sampling_variance(joint, design, l);
  if (truth > 0.0) result.relative = result.absolute / truth;
  return result;
}

// Full per-effect analysis of one observed summary.
struct EffectReport {
  int effect = 0;
  double point = 0.0;
  double var_classic = 0.0;
  double var_improved = 0.0;
  Interval ci_classic;
  Interval ci_improved;
  double gamma = 0.0;  // relative estimated variance reduction

  friend bool operator==(const EffectReport&, const EffectReport&) = default;
};

inline EffectReport analyze_effect(const ObservedSummary& obs, int l, double ci_level) {
  EffectReport r;
  r.effect = l;
  r.point = estimate_effect(obs, l);
  r.var_classic = classic_variance(obs);
  r.var_improved = improved_variance(obs, l);
  r.ci_classic = confidence_interval(r.point, r.var_classic, ci_level);
  r.ci_improved = confidence_interval(r.point, r.var_improved, ci_level);
  r.gamma = r.var_classic > 0.0 ? 1.0 - r.var_improved / r.var_classic : 0.0;
  return r;
}

}  // namespace neyman_sharp
