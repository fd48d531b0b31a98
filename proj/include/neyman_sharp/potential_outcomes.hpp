#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "neyman_sharp/contrasts.hpp"

namespace neyman_sharp {

// The science table: one row per unit, the four binary potential outcomes
// Y_i(z_1)..Y_i(z_4). Only one entry per row is ever observed in a real
// experiment; the full table exists for ground-truth computations,
// enumeration oracles and simulation.
struct PotentialOutcomeTable {
  std::vector<std::array<std::uint8_t, 4>> rows;

  PotentialOutcomeTable() = default;
  explicit PotentialOutcomeTable(std::vector<std::array<std::uint8_t, 4>> r)
      : rows(std::move(r)) {
    for (const auto& row : rows) {
      for (int j = 0; j < 4; ++j) {
        if (row[static_cast<std::size_t>(j)] > 1) {
          throw std::invalid_argument("PotentialOutcomeTable: outcomes must be 0 or 1");
        }
      }
    }
  }

  std::int64_t size() const { return static_cast<std::int64_t>(rows.size()); }
};

// Cell index of an outcome profile: the binary number k1 k2 k3 k4, where
// k_j = Y(z_j) and k_1 is the most significant bit. Cells run 0..15.
inline constexpr int cell_index(int y1, int y2, int y3, int y4) {
  return y1 * 8 + y2 * 4 + y3 * 2 + y4;
}

inline constexpr bool cell_has_arm(int cell, int arm /* 0-based */) {
  return ((cell >> (3 - arm)) & 1) != 0;
}

// Counts of the 16 outcome profiles; a sufficient summary of the science
// table (rows are exchangeable for every quantity computed here).
struct JointDistribution {
  std::array<std::int64_t, 16> counts{};

  JointDistribution() = default;
  explicit JointDistribution(const std::array<std::int64_t, 16>& c) : counts(c) {
    for (auto v : counts) {
      if (v < 0) throw std::invalid_argument("JointDistribution: negative cell count");
    }
  }

  std::int64_t total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  }

  friend bool operator==(const JointDistribution&, const JointDistribution&) = default;
};

inline JointDistribution to_joint(const PotentialOutcomeTable& table) {
  JointDistribution joint;
  for (const auto& row : table.rows) {
    ++joint.counts[static_cast<std::size_t>(cell_index(row[0], row[1], row[2], row[3]))];
  }
  return joint;
}

// Canonical expansion: rows emitted in ascending cell-index order, so the
// result is a reproducible fixture for any given joint distribution.
inline PotentialOutcomeTable to_table(const JointDistribution& joint) {
  PotentialOutcomeTable table;
  table.rows.reserve(static_cast<std::size_t>(joint.total()));
  for (int cell = 0; cell < 16; ++cell) {
    const std::array<std::uint8_t, 4> row = {
        static_cast<std::uint8_t>(cell_has_arm(cell, 0) ? 1 : 0),
        static_cast<std::uint8_t>(cell_has_arm(cell, 1) ? 1 : 0),
        static_cast<std::uint8_t>(cell_has_arm(cell, 2) ? 1 : 0),
        static_cast<std::uint8_t>(cell_has_arm(cell, 3) ? 1 : 0)};
    for (std::int64_t k = 0; k < joint.counts[static_cast<std::size_t>(cell)]; ++k) {
      table.rows.push_back(row);
    }
  }
  return table;
}

// N_{j1..js}: number of units with outcome 1 on every arm of the subset.
// The subset is a nonzero bitmask over arms, bit j (0-based) = arm j+1.
inline std::int64_t subset_count(const JointDistribution& joint, unsigned arm_mask) {
  if (arm_mask == 0 || arm_mask > 0xF) {
    throw std::invalid_argument("subset_count: arm mask must be a non-empty subset of the 4 arms");
  }
  std::int64_t total = 0;
  for (int cell = 0; cell < 16; ++cell) {
    bool all = true;
    for (int j = 0; j < 4 && all; ++j) {
      if ((arm_mask >> j) & 1u) all = cell_has_arm(cell, j);
    }
    if (all) total += joint.counts[static_cast<std::size_t>(cell)];
  }
  return total;
}

inline std::array<std::int64_t, 4> marginal_counts(const JointDistribution& joint) {
  std::array<std::int64_t, 4> m{};
  for (int cell = 0; cell < 16; ++cell) {
    for (int j = 0; j < 4; ++j) {
      if (cell_has_arm(cell, j)) m[static_cast<std::size_t>(j)] += joint.counts[static_cast<std::size_t>(cell)];
    }
  }
  return m;
}

inline std::array<double, 4> arm_means(const JointDistribution& joint) {
  const auto m = marginal_counts(joint);
  const auto n = static_cast<double>(joint.total());
  return {static_cast<double>(m[0]) / n, static_cast<double>(m[1]) / n,
          static_cast<double>(m[2]) / n, static_cast<double>(m[3]) / n};
}

// Integer kernels shared by the variance formulas. With
//   T_l = sum_j h_lj N_j            (so tau_l = T_l / 2N) and
//   Q_l = sum_j N_j + sum_{j != j'} h_lj h_lj' N_{jj'},
// the unit-effect variance is S^2(tau_l) = (N Q_l - T_l^2) / (4 N (N-1)).
// Keeping both as exact integers lets equality tests avoid rounding.
inline std::int64_t contrast_total(const JointDistribution& joint, int l) {
  const auto& h = contrast(l).h;
  const auto m = marginal_counts(joint);
  std::int64_t t = 0;
  for (int j = 0; j < 4; ++j) t += h[static_cast<std::size_t>(j)] * m[static_cast<std::size_t>(j)];
  return t;
}

inline std::int64_t quadratic_total(const JointDistribution& joint, int l) {
  const auto& h = contrast(l).h;
  const auto m = marginal_counts(joint);
  std::int64_t q = m[0] + m[1] + m[2] + m[3];
  for (int j = 0; j < 4; ++j) {
    for (int jp = j + 1; jp < 4; ++jp) {
      const auto pair_mask = (1u << j) | (1u << jp);
      q += 2 * h[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(jp)] *
           subset_count(joint, pair_mask);
    }
  }
  return q;
}

// 2 * tau_il for a single row; an integer in {-2,...,2}.
inline int doubled_unit_effect(const std::array<std::uint8_t, 4>& row, int l) {
  const auto& h = contrast(l).h;
  int t = 0;
  for (int j = 0; j < 4; ++j) t += h[static_cast<std::size_t>(j)] * row[static_cast<std::size_t>(j)];
  return t;
}

inline double unit_effect(const std::array<std::uint8_t, 4>& row, int l) {
  return 0.5 * doubled_unit_effect(row, l);
}

inline double population_effect_of_joint(const JointDistribution& joint, int l) {
  const auto n = joint.total();
  if (n < 1) throw std::invalid_argument("population_effect_of_joint: empty table");
  return static_cast<double>(contrast_total(joint, l)) / (2.0 * static_cast<double>(n));
}

// S^2(tau_l) straight from the definition: sample variance of the unit
// effects, accumulated in integers before the single division.
inline double s2_tau_direct(const PotentialOutcomeTable& table, int l) {
  const std::int64_t n = table.size();
  if (n < 2) throw std::invalid_argument("s2_tau_direct: needs at least 2 units");
  std::int64_t t_sum = 0, t_sq = 0;
  for (const auto& row : table.rows) {
    const int t = doubled_unit_effect(row, l);
    t_sum += t;
    t_sq += static_cast<std::int64_t>(t) * t;
  }
  return static_cast<double>(n * t_sq - t_sum * t_sum) /
         (4.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

// Same quantity computed from the joint distribution via the count identity
//   S^2(tau_l) = [sum_j N_j + sum_{j != j'} h_lj h_lj' N_{jj'}] / (4(N-1))
//                - N/(N-1) * tau_l^2.
inline double s2_tau_lemma1(const JointDistribution& joint, int l) {
  const std::int64_t n = joint.total();
  if (n < 2) throw std::invalid_argument("s2_tau_lemma1: needs at least 2 units");
  const std::int64_t q = quadratic_total(joint, l);
  const std::int64_t t = contrast_total(joint, l);
  return static_cast<double>(n * q - t * t) /
         (4.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

// Integer numerator of S^2(tau_l) over the common denominator 4N(N-1);
// used wherever exact comparisons matter.
inline std::int64_t s2_tau_numerator(const JointDistribution& joint, int l) {
  const std::int64_t n = joint.total();
  const std::int64_t q = quadratic_total(joint, l);
  const std::int64_t t = contrast_total(joint, l);
  return n * q - t * t;
}

// Generalized monotonicity of the potential outcomes with respect to the
// arm groups J_- and J_+ of contrast l. Form 1 demands, for every unit,
//   sum_{J+} Y - 1 <= sum_{J-} Y <= sum_{J+} Y,
// form 2 the mirrored chain
//   sum_{J+} Y <= sum_{J-} Y <= sum_{J+} Y + 1.
// Both can hold at once; either one makes the variance bound tight.
struct MonotonicityStatus {
  bool form1 = false;
  bool form2 = false;

  bool neither() const { return !form1 && !form2; }
};

inline MonotonicityStatus monotonicity_status(const PotentialOutcomeTable& table, int l) {
  const Contrast c = contrast(l);
  MonotonicityStatus status{true, true};
  for (const auto& row : table.rows) {
    const int s_minus = row[static_cast<std::size_t>(c.arms_minus[0])] +
                        row[static_cast<std::size_t>(c.arms_minus[1])];
    const int s_plus = row[static_cast<std::size_t>(c.arms_plus[0])] +
                       row[static_cast<std::size_t>(c.arms_plus[1])];
    if (!(s_plus - 1 <= s_minus && s_minus <= s_plus)) status.form1 = false;
    if (!(s_plus <= s_minus && s_minus <= s_plus + 1)) status.form2 = false;
    if (status.neither()) break;
  }
  return status;
}

inline MonotonicityStatus monotonicity_status(const JointDistribution& joint, int l) {
  const Contrast c = contrast(l);
  MonotonicityStatus status{true, true};
  for (int cell = 0; cell < 16; ++cell) {
    if (joint.counts[static_cast<std::size_t>(cell)] == 0) continue;
    const int s_minus = (cell_has_arm(cell, c.arms_minus[0]) ? 1 : 0) +
                        (cell_has_arm(cell, c.arms_minus[1]) ? 1 : 0);
    const int s_plus = (cell_has_arm(cell, c.arms_plus[0]) ? 1 : 0) +
                       (cell_has_arm(cell, c.arms_plus[1]) ? 1 : 0);
    if (!(s_plus - 1 <= s_minus && s_minus <= s_plus)) status.form1 = false;
    if (!(s_plus <= s_minus && s_minus <= s_plus + 1)) status.form2 = false;
  }
  return status;
}

}  // namespace neyman_sharp
