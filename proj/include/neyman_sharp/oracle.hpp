#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "neyman_sharp/design.hpp"
#include "neyman_sharp/estimators.hpp"
#include "neyman_sharp/potential_outcomes.hpp"

namespace neyman_sharp {

// Exhaustive-enumeration ground truth at desk scale: every joint
// distribution of a given size, every complete-randomization assignment,
// and the count inequalities behind the variance bound. Deliberately brute
// force; these routines are the trusted reference the fast paths are
// checked against.

inline constexpr int kDefaultJointGuard = 12;
inline constexpr std::int64_t kDefaultAssignmentGuard = 10'000'000;

struct EnumerationGuardError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// C(n+15, 15): number of 16-cell joint distributions with total n.
inline std::int64_t joint_space_size(int n) {
  __int128 v = 1;
  for (int k = 1; k <= 15; ++k) {
    v = v * (n + k) / k;  // exact at every step for binomial prefixes
  }
  return static_cast<std::int64_t>(v);
}

namespace detail {

template <typename Fn>
void enumerate_joints_rec(std::array<std::int64_t, 16>& cells, int pos, std::int64_t left,
                          Fn&& fn) {
  if (pos == 15) {
    cells[15] = left;
    fn(const_cast<const std::array<std::int64_t, 16>&>(cells));
    return;
  }
  for (std::int64_t c = 0; c <= left; ++c) {
    cells[static_cast<std::size_t>(pos)] = c;
    enumerate_joints_rec(cells, pos + 1, left - c, fn);
  }
}

// Lowest cell index containing each arm; below it no remaining cell can
// serve that arm's demand (cells are visited in descending index order).
inline constexpr std::array<int, 4> kLowestCellWithArm = {8, 4, 2, 1};

template <typename Fn>
void enumerate_with_marginals_rec(std::array<std::int64_t, 16>& cells, int cell,
                                  std::int64_t left, std::array<std::int64_t, 4>& need,
                                  Fn&& fn) {
  if (cell == 0) {
    if (need[0] == 0 && need[1] == 0 && need[2] == 0 && need[3] == 0) {
      cells[0] = left;
      fn(const_cast<const std::array<std::int64_t, 16>&>(cells));
    }
    return;
  }
  for (int j = 0; j < 4; ++j) {
    const auto js = static_cast<std::size_t>(j);
    if (need[js] > left) return;
    if (need[js] > 0 && cell < kLowestCellWithArm[js]) return;
  }
  std::int64_t hi = left;
  for (int j = 0; j < 4; ++j) {
    if (cell_has_arm(cell, j)) hi = std::min(hi, need[static_cast<std::size_t>(j)]);
  }
  for (std::int64_t c = 0; c <= hi; ++c) {
    cells[static_cast<std::size_t>(cell)] = c;
    for (int j = 0; j < 4; ++j) {
      if (cell_has_arm(cell, j)) need[static_cast<std::size_t>(j)] -= c;
    }
    enumerate_with_marginals_rec(cells, cell - 1, left - c, need, fn);
    for (int j = 0; j < 4; ++j) {
      if (cell_has_arm(cell, j)) need[static_cast<std::size_t>(j)] += c;
    }
  }
  cells[static_cast<std::size_t>(cell)] = 0;
}

}  // namespace detail

// Streams every 16-vector of non-negative integers summing to n, each
// exactly once, in ascending lexicographic order.
template <typename Fn>
void enumerate_joints(int n, Fn&& fn, int guard = kDefaultJointGuard) {
  if (n < 0) throw std::invalid_argument("enumerate_joints: n must be non-negative");
  if (n > guard) {
    throw EnumerationGuardError("enumerate_joints: n = " + std::to_string(n) +
                                " exceeds the enumeration guard " + std::to_string(guard) +
                                " (" + std::to_string(joint_space_size(n)) +
                                " joints); raise the guard explicitly for offline runs");
  }
  std::array<std::int64_t, 16> cells{};
  detail::enumerate_joints_rec(cells, 0, n, fn);
}

// Streams only the joints whose per-arm one counts match the given
// marginals. Any marginal vector with 0 <= N_j <= n is feasible.
template <typename Fn>
void enumerate_joints_with_marginals(int n, const std::array<std::int64_t, 4>& marginals,
                                     Fn&& fn, int guard = kDefaultJointGuard) {
  if (n < 0) throw std::invalid_argument("enumerate_joints_with_marginals: n must be non-negative");
  if (n > guard) {
    throw EnumerationGuardError("enumerate_joints_with_marginals: n = " + std::to_string(n) +
                                " exceeds the enumeration guard " + std::to_string(guard));
  }
  for (int j = 0; j < 4; ++j) {
    const auto m = marginals[static_cast<std::size_t>(j)];
    if (m < 0 || m > n) {
      throw std::invalid_argument("enumerate_joints_with_marginals: marginal out of [0, n]");
    }
  }
  std::array<std::int64_t, 16> cells{};
  std::array<std::int64_t, 4> need = marginals;
  detail::enumerate_with_marginals_rec(cells, 15, n, need, fn);
}

// Exhaustive minimum of S^2(tau_l), per effect index, over all science
// tables compatible with the marginal counts. All three effects are folded
// in one pass; enumeration dominates the cost.
inline std::array<double, 3> min_s2_given_marginals(int n,
                                                    const std::array<std::int64_t, 4>& marginals,
                                                    int guard = kDefaultJointGuard) {
  if (n < 2) throw std::invalid_argument("min_s2_given_marginals: n must be at least 2");
  std::array<std::int64_t, 3> min_num = {INT64_MAX, INT64_MAX, INT64_MAX};
  enumerate_joints_with_marginals(
      n, marginals,
      [&](const std::array<std::int64_t, 16>& cells) {
        const JointDistribution joint{cells};
        for (int l = 1; l <= 3; ++l) {
          min_num[static_cast<std::size_t>(l - 1)] =
              std::min(min_num[static_cast<std::size_t>(l - 1)], s2_tau_numerator(joint, l));
        }
      },
      guard);
  const double denom = 4.0 * static_cast<double>(n) * static_cast<double>(n - 1);
  return {static_cast<double>(min_num[0]) / denom, static_cast<double>(min_num[1]) / denom,
          static_cast<double>(min_num[2]) / denom};
}

// Number of complete-randomization assignments, N! / (n_1! n_2! n_3! n_4!),
// clamped to guard+1 when it overflows the guard.
inline std::int64_t assignment_count(const Design& design, std::int64_t guard = kDefaultAssignmentGuard) {
  __int128 total = 1;
  std::int64_t drawn = 0;
  for (int j = 0; j < 4; ++j) {
    for (std::int64_t k = 1; k <= design.arm_sizes[static_cast<std::size_t>(j)]; ++k) {
      total = total * (++drawn) / k;  // running product of binomials, exact
      if (total > guard) return guard + 1;
    }
  }
  return static_cast<std::int64_t>(total);
}

// Exact first and second moments of the effect estimator, and the exact
// expectation of the classic variance estimator, over every assignment.
// Accumulation is integer-exact; floating division happens once at the end.
struct RandomizationMoments {
  double mean = 0.0;
  double variance = 0.0;
  double classic_expectation = 0.0;
  std::int64_t assignments = 0;
};

inline RandomizationMoments exact_randomization_moments(
    const PotentialOutcomeTable& table, const Design& design, int l,
    std::int64_t guard = kDefaultAssignmentGuard) {
  const std::int64_t n = table.size();
  if (n != design.n_total) {
    throw std::invalid_argument("exact_randomization_moments: table size differs from design");
  }
  const std::int64_t m_count = assignment_count(design, guard);
  if (m_count > guard) {
    throw EnumerationGuardError(
        "exact_randomization_moments: assignment count exceeds the guard " +
        std::to_string(guard));
  }

  // Common denominator for tauhat: with L = lcm(n_j), tauhat = q / (2L)
  // where q = sum_j h_j (L / n_j) c_j is an integer per assignment.
  std::int64_t lcm = 1;
  for (int j = 0; j < 4; ++j) lcm = std::lcm(lcm, design.arm_sizes[static_cast<std::size_t>(j)]);
  const auto& h = contrast(l).h;
  std::array<std::int64_t, 4> weight{};
  for (int j = 0; j < 4; ++j) {
    const auto js = static_cast<std::size_t>(j);
    weight[js] = h[js] * (lcm / design.arm_sizes[js]);
  }

  std::vector<std::uint8_t> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < 4; ++j) {
    labels.insert(labels.end(), static_cast<std::size_t>(design.arm_sizes[static_cast<std::size_t>(j)]),
                  static_cast<std::uint8_t>(j));
  }

  std::int64_t sum_q = 0;
  __int128 sum_q2 = 0;
  std::array<std::int64_t, 4> classic_num{};  // sum over assignments of c_j (n_j - c_j)
  std::int64_t seen = 0;
  do {
    std::array<std::int64_t, 4> c{};
    for (std::int64_t i = 0; i < n; ++i) {
      const int arm = labels[static_cast<std::size_t>(i)];
      c[static_cast<std::size_t>(arm)] += table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(arm)];
    }
    std::int64_t q = 0;
    for (int j = 0; j < 4; ++j) {
      const auto js = static_cast<std::size_t>(j);
      q += weight[js] * c[js];
      classic_num[js] += c[js] * (design.arm_sizes[js] - c[js]);
    }
    sum_q += q;
    sum_q2 += static_cast<__int128>(q) * q;
    ++seen;
  } while (std::next_permutation(labels.begin(), labels.end()));

  RandomizationMoments out;
  out.assignments = seen;
  const double m = static_cast<double>(seen);
  const double two_l = 2.0 * static_cast<double>(lcm);
  out.mean = static_cast<double>(sum_q) / (m * two_l);
  const __int128 var_num =
      static_cast<__int128>(seen) * sum_q2 - static_cast<__int128>(sum_q) * sum_q;
  out.variance = static_cast<double>(static_cast<long double>(var_num)) / (m * m * two_l * two_l);
  double ev = 0.0;
  for (int j = 0; j < 4; ++j) {
    const auto js = static_cast<std::size_t>(j);
    const double nj = static_cast<double>(design.arm_sizes[js]);
    ev += static_cast<double>(classic_num[js]) / (m * nj * nj * (nj - 1.0));
  }
  out.classic_expectation = 0.25 * ev;
  return out;
}

// The four inclusion-exclusion inequalities whose simultaneous tightness is
// equivalent to one generalized monotonicity form. chain_form1 bounds the
// contrast sum from one side (groups J_-, J_+), chain_form2 from the other.
struct CountInequality {
  std::int64_t lhs = 0;
  std::int64_t rhs = 0;

  bool holds() const { return lhs <= rhs; }
  bool tight() const { return lhs == rhs; }
};

struct InequalityChain {
  std::array<CountInequality, 4> links{};

  bool all_hold() const {
    return links[0].holds() && links[1].holds() && links[2].holds() && links[3].holds();
  }
  bool all_tight() const {
    return links[0].tight() && links[1].tight() && links[2].tight() && links[3].tight();
  }
};

struct InclusionExclusionReport {
  InequalityChain chain_form1;
  InequalityChain chain_form2;
};

namespace detail {

inline unsigned arm_mask(int a) { return 1u << a; }
inline unsigned arm_mask(int a, int b) { return arm_mask(a) | arm_mask(b); }
inline unsigned arm_mask(int a, int b, int c) { return arm_mask(a, b) | arm_mask(c); }

inline InequalityChain ie_chain(const JointDistribution& joint, int a, int b, int c, int d) {
  const std::int64_t n_ab = subset_count(joint, arm_mask(a, b));
  const std::int64_t n_cd = subset_count(joint, arm_mask(c, d));
  const std::int64_t n_abcd = subset_count(joint, 0xF);
  InequalityChain chain;
  chain.links[0] = {n_abcd, n_ab};
  chain.links[1] = {subset_count(joint, arm_mask(a, c)) + subset_count(joint, arm_mask(a, d)) -
                        subset_count(joint, arm_mask(a, c, d)),
                    subset_count(joint, arm_mask(a))};
  chain.links[2] = {subset_count(joint, arm_mask(b, c)) + subset_count(joint, arm_mask(b, d)) -
                        subset_count(joint, arm_mask(b, c, d)),
                    subset_count(joint, arm_mask(b))};
  chain.links[3] = {subset_count(joint, arm_mask(a, c, d)) + subset_count(joint, arm_mask(b, c, d)) -
                        n_abcd,
                    n_cd};
  return chain;
}

}  // namespace detail

inline InclusionExclusionReport inclusion_exclusion_report(const JointDistribution& joint,
                                                           int l) {
  const Contrast con = contrast(l);
  const int a = con.arms_minus[0], b = con.arms_minus[1];
  const int c = con.arms_plus[0], d = con.arms_plus[1];
  InclusionExclusionReport report;
  report.chain_form1 = detail::ie_chain(joint, a, b, c, d);
  report.chain_form2 = detail::ie_chain(joint, c, d, a, b);
  return report;
}

inline InclusionExclusionReport inclusion_exclusion_report(const PotentialOutcomeTable& table,
                                                           int l) {
  return inclusion_exclusion_report(to_joint(table), l);
}

// Single-pass sharpness certificate: enumerate every joint of size n,
// bucket by marginals, and check that the per-bucket minimum of
// N Q_l - T_l^2 equals the bound numerator max{|T_l| (N - |T_l|), 0}
// exactly, for every l. `bound_bias` perturbs the expected numerator and
// exists only so failure reporting can be exercised end to end.
struct SharpnessCertificate {
  bool pass = false;
  int n = 0;
  std::int64_t joints_enumerated = 0;
  std::int64_t profiles_checked = 0;

  struct Mismatch {
    std::array<std::int64_t, 4> marginals{};
    int effect = 0;
    std::int64_t min_numerator = 0;
    std::int64_t bound_numerator = 0;
  };
  std::vector<Mismatch> counterexamples;  // capped at 10
};

inline SharpnessCertificate certify_sharpness(int n, int guard = kDefaultJointGuard,
                                              std::int64_t bound_bias = 0) {
  if (n < 2) throw std::invalid_argument("certify_sharpness: n must be at least 2");
  SharpnessCertificate cert;
  cert.n = n;
  const int base = n + 1;
  const std::size_t buckets = static_cast<std::size_t>(base) * base * base * base;
  std::vector<std::array<std::int64_t, 3>> min_q(buckets, {INT64_MAX, INT64_MAX, INT64_MAX});

  std::int64_t seen = 0;
  enumerate_joints(
      n,
      [&](const std::array<std::int64_t, 16>& cells) {
        ++seen;
        std::array<std::int64_t, 4> m{};
        std::array<std::int64_t, 6> pair{};  // (12),(13),(14),(23),(24),(34)
        for (int cell = 0; cell < 16; ++cell) {
          const std::int64_t cnt = cells[static_cast<std::size_t>(cell)];
          if (cnt == 0) continue;
          int idx = 0;
          for (int j = 0; j < 4; ++j) {
            const bool bj = cell_has_arm(cell, j);
            if (bj) m[static_cast<std::size_t>(j)] += cnt;
            for (int jp = j + 1; jp < 4; ++jp, ++idx) {
              if (bj && cell_has_arm(cell, jp)) pair[static_cast<std::size_t>(idx)] += cnt;
            }
          }
        }
        const std::int64_t base_q = m[0] + m[1] + m[2] + m[3];
        const std::size_t bucket = static_cast<std::size_t>(
            ((m[0] * base + m[1]) * base + m[2]) * base + m[3]);
        for (int l = 1; l <= 3; ++l) {
          const auto& h = kModelMatrix[static_cast<std::size_t>(l)];
          std::int64_t q = base_q;
          int idx = 0;
          for (int j = 0; j < 4; ++j) {
            for (int jp = j + 1; jp < 4; ++jp, ++idx) {
              q += 2 * h[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(jp)] *
                   pair[static_cast<std::size_t>(idx)];
            }
          }
          auto& slot = min_q[bucket][static_cast<std::size_t>(l - 1)];
          slot = std::min(slot, q);
        }
      },
      guard);
  cert.joints_enumerated = seen;

  cert.pass = true;
  for (std::int64_t m1 = 0; m1 <= n; ++m1) {
    for (std::int64_t m2 = 0; m2 <= n; ++m2) {
      for (std::int64_t m3 = 0; m3 <= n; ++m3) {
        for (std::int64_t m4 = 0; m4 <= n; ++m4) {
          const std::size_t bucket = static_cast<std::size_t>(
              ((m1 * base + m2) * base + m3) * base + m4);
          const std::array<std::int64_t, 4> marg = {m1, m2, m3, m4};
          ++cert.profiles_checked;
          for (int l = 1; l <= 3; ++l) {
            const auto& h = kModelMatrix[static_cast<std::size_t>(l)];
            std::int64_t t = 0;
            for (int j = 0; j < 4; ++j) {
              t += h[static_cast<std::size_t>(j)] * marg[static_cast<std::size_t>(j)];
            }
            const std::int64_t q_min = min_q[bucket][static_cast<std::size_t>(l - 1)];
            const std::int64_t min_num = (q_min == INT64_MAX) ? INT64_MAX : n * q_min - t * t;
            const std::int64_t abs_t = t < 0 ? -t : t;
            const std::int64_t bound_num = std::max<std::int64_t>(abs_t * (n - abs_t), 0) + bound_bias;
            if (min_num != bound_num) {
              cert.pass = false;
              if (cert.counterexamples.size() < 10) {
                cert.counterexamples.push_back({marg, l, min_num, bound_num});
              }
            }
          }
        }
      }
    }
  }
  return cert;
}

}  // namespace neyman_sharp
