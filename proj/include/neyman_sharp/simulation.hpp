#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "neyman_sharp/design.hpp"
#include "neyman_sharp/estimators.hpp"
#include "neyman_sharp/potential_outcomes.hpp"
#include "neyman_sharp/rng.hpp"

namespace neyman_sharp {

// Monte Carlo study of the two variance estimators: generate (or accept) a
// science table, draw complete-randomization assignments, and aggregate
// over-estimation, interval length and coverage for each requested effect.

// --- Science-table generators ------------------------------------------------

struct LatentNormalSpec {
  std::array<double, 4> mu{};
  double rho = 0.0;
  std::int64_t n = 0;
};

struct SparseMultinomialSpec {
  double lambda1 = 30.0;
  std::int64_t n = 0;
};

struct ExplicitJointSpec {
  JointDistribution joint;
};

using GeneratorSpec = std::variant<LatentNormalSpec, SparseMultinomialSpec, ExplicitJointSpec>;

// One draw of the latent equicorrelated Gaussian vector. The covariance
// (1-rho) I + rho J has the closed-form square root
//   sqrt(1+3 rho) P + sqrt(1-rho) (I - P),  P = J/4,
// which stays valid at the singular boundary rho = -1/3.
inline std::array<double, 4> latent_normal_draw(const std::array<double, 4>& mu, double rho,
                                                RandomStream& rng) {
  if (rho < -1.0 / 3.0 || rho >= 1.0) {
    throw std::invalid_argument("latent_normal_draw: rho must lie in [-1/3, 1)");
  }
  const double s_common = std::sqrt(1.0 + 3.0 * rho);
  const double s_resid = std::sqrt(1.0 - rho);
  std::array<double, 4> g{};
  double mean = 0.0;
  for (auto& v : g) {
    v = rng.next_normal();
    mean += v;
  }
  mean *= 0.25;
  std::array<double, 4> eta{};
  for (int j = 0; j < 4; ++j) {
    const auto js = static_cast<std::size_t>(j);
    eta[js] = mu[js] + s_common * mean + s_resid * (g[js] - mean);
  }
  return eta;
}

inline PotentialOutcomeTable gen_latent_normal(std::int64_t n, const std::array<double, 4>& mu,
                                               double rho, RandomStream& rng) {
  if (n < 1) throw std::invalid_argument("gen_latent_normal: n must be positive");
  PotentialOutcomeTable table;
  table.rows.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto eta = latent_normal_draw(mu, rho, rng);
    table.rows.push_back({static_cast<std::uint8_t>(eta[0] >= 0.0 ? 1 : 0),
                          static_cast<std::uint8_t>(eta[1] >= 0.0 ? 1 : 0),
                          static_cast<std::uint8_t>(eta[2] >= 0.0 ? 1 : 0),
                          static_cast<std::uint8_t>(eta[3] >= 0.0 ? 1 : 0)});
  }
  return table;
}

// Sparse-outcome generator: cell weights lambda_1 (fixed) and
// lambda_2..lambda_16 ~ iid Uniform(0,1), normalized to probabilities, then
// D ~ Multinomial(n, p). Large lambda_1 concentrates mass on the all-zero
// profile.
inline JointDistribution gen_sparse_multinomial(std::int64_t n, double lambda1,
                                                RandomStream& rng) {
  if (n < 1) throw std::invalid_argument("gen_sparse_multinomial: n must be positive");
  if (!(lambda1 > 0.0)) throw std::invalid_argument("gen_sparse_multinomial: lambda1 must be positive");
  std::array<double, 16> cumulative{};
  double total = lambda1;
  cumulative[0] = lambda1;
  for (int cell = 1; cell < 16; ++cell) {
    total += rng.next_double();
    cumulative[static_cast<std::size_t>(cell)] = total;
  }
  JointDistribution joint;
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = rng.next_double() * total;
    int cell = 0;
    while (cell < 15 && u >= cumulative[static_cast<std::size_t>(cell)]) ++cell;
    ++joint.counts[static_cast<std::size_t>(cell)];
  }
  return joint;
}

// --- Complete randomization ---------------------------------------------------

inline std::vector<std::uint8_t> make_arm_labels(const std::array<std::int64_t, 4>& arm_sizes) {
  std::vector<std::uint8_t> labels;
  std::int64_t total = 0;
  for (int j = 0; j < 4; ++j) {
    const auto nj = arm_sizes[static_cast<std::size_t>(j)];
    if (nj < 1) throw std::invalid_argument("make_arm_labels: arm sizes must be positive");
    total += nj;
  }
  labels.reserve(static_cast<std::size_t>(total));
  for (int j = 0; j < 4; ++j) {
    labels.insert(labels.end(), static_cast<std::size_t>(arm_sizes[static_cast<std::size_t>(j)]),
                  static_cast<std::uint8_t>(j));
  }
  return labels;
}

// Uniform shuffle of the arm-label multiset: every assignment with the
// prescribed arm counts is equally likely.
inline void complete_randomization(std::span<std::uint8_t> labels, RandomStream& rng) {
  rng.shuffle(labels.begin(), labels.end());
}

inline std::vector<std::uint8_t> assign(const Design& design, RandomStream& rng) {
  auto labels = make_arm_labels(design.arm_sizes);
  complete_randomization(labels, rng);
  return labels;
}

// Collapses a science table and an assignment into the observed summary:
// n_j^obs counts successes among the units assigned to arm j.
inline ObservedSummary observe(const PotentialOutcomeTable& table,
                               std::span<const std::uint8_t> assignment) {
  if (static_cast<std::int64_t>(assignment.size()) != table.size()) {
    throw std::invalid_argument("observe: assignment length differs from table size");
  }
  std::array<std::int64_t, 4> sizes{};
  std::array<std::int64_t, 4> successes{};
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int arm = assignment[i];
    if (arm < 0 || arm > 3) throw std::invalid_argument("observe: arm label out of range");
    ++sizes[static_cast<std::size_t>(arm)];
    successes[static_cast<std::size_t>(arm)] += table.rows[i][static_cast<std::size_t>(arm)];
  }
  return ObservedSummary(sizes, successes);
}

// --- Replicated study ----------------------------------------------------------

struct SimulationConfig {
  GeneratorSpec generator;
  Design design;
  std::int64_t replicates = 10000;
  double ci_level = 0.95;
  std::uint64_t master_seed = 0;
  std::vector<int> effects = {1, 2, 3};
  std::uint64_t case_id = 0;
  int threads = 0;  // 0 = resolve from NEYMAN_SHARP_THREADS / hardware
};

struct CaseSummary {
  int effect = 0;
  double tau_true = 0.0;
  double s2_tau = 0.0;
  double s2_lower_bound = 0.0;
  double true_variance = 0.0;
  bool voe_defined = false;
  double voe_classic = 0.0;   // mean(varhat)/true - 1, as a fraction
  double voe_improved = 0.0;
  double len_classic = 0.0;   // mean CI length, upper - lower
  double len_improved = 0.0;
  double cover_classic = 0.0;
  double cover_improved = 0.0;
  double mc_se_classic = 0.0;  // Monte Carlo SE of each coverage rate
  double mc_se_improved = 0.0;
  std::int64_t replicates = 0;
  std::int64_t subset_violations = 0;  // replicates with improved > classic

  friend bool operator==(const CaseSummary&, const CaseSummary&) = default;
};

inline int resolve_threads(int requested) {
  int cap = 0;
  if (const char* env = std::getenv("NEYMAN_SHARP_THREADS")) {
    cap = std::atoi(env);
  }
  int threads = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (cap > 0) threads = std::min(threads, cap);
  return threads;
}

namespace detail {

// Stream ids: 0 draws the science table, replicate r uses id r + 1.
inline constexpr std::uint64_t kTableStream = 0;

struct BlockTotals {
  double sum_var_classic = 0.0;
  double sum_var_improved = 0.0;
  double sum_len_classic = 0.0;
  double sum_len_improved = 0.0;
  std::int64_t cover_classic = 0;
  std::int64_t cover_improved = 0;
  std::int64_t violations = 0;
};

}  // namespace detail

// Runs the three-step study for one case: fix the science table, replicate
// complete randomization, aggregate. Replicates are independent streams
// keyed by (master_seed, case_id, replicate), and aggregation runs over
// fixed-size blocks combined in index order, so the result is bit-identical
// for any thread count.
inline std::vector<CaseSummary> run_case(const SimulationConfig& config) {
  if (config.replicates < 1) throw std::invalid_argument("run_case: replicates must be >= 1");
  for (int l : config.effects) {
    if (l < 1 || l > 3) throw std::invalid_argument("run_case: effect indices must be in {1,2,3}");
  }

  PotentialOutcomeTable table;
  if (const auto* spec = std::get_if<LatentNormalSpec>(&config.generator)) {
    RandomStream rng = substream(config.master_seed, config.case_id, detail::kTableStream);
    table = gen_latent_normal(spec->n, spec->mu, spec->rho, rng);
  } else if (const auto* spec = std::get_if<SparseMultinomialSpec>(&config.generator)) {
    RandomStream rng = substream(config.master_seed, config.case_id, detail::kTableStream);
    table = to_table(gen_sparse_multinomial(spec->n, spec->lambda1, rng));
  } else {
    table = to_table(std::get<ExplicitJointSpec>(config.generator).joint);
  }
  if (table.size() != config.design.n_total) {
    throw std::invalid_argument("run_case: table size differs from design total");
  }

  const JointDistribution joint = to_joint(table);
  const double z = critical_value(config.ci_level);
  const std::size_t n_effects = config.effects.size();

  const std::int64_t block_size = 256;
  const std::int64_t n_blocks = (config.replicates + block_size - 1) / block_size;
  std::vector<std::vector<detail::BlockTotals>> block_totals(
      static_cast<std::size_t>(n_blocks), std::vector<detail::BlockTotals>(n_effects));

  const auto labels_template = make_arm_labels(config.design.arm_sizes);
  std::vector<double> tau_true(n_effects);
  for (std::size_t e = 0; e < n_effects; ++e) {
    tau_true[e] = population_effect_of_joint(joint, config.effects[e]);
  }

  const int threads = resolve_threads(config.threads);
  std::atomic<std::int64_t> next_block{0};
  auto worker = [&]() {
    std::vector<std::uint8_t> labels(labels_template.size());
    for (;;) {
      const std::int64_t block = next_block.fetch_add(1);
      if (block >= n_blocks) return;
      auto& totals = block_totals[static_cast<std::size_t>(block)];
      const std::int64_t first = block * block_size;
      const std::int64_t last = std::min(first + block_size, config.replicates);
      for (std::int64_t r = first; r < last; ++r) {
        RandomStream rng = substream(config.master_seed, config.case_id,
                                     static_cast<std::uint64_t>(r) + 1);
        std::copy(labels_template.begin(), labels_template.end(), labels.begin());
        complete_randomization(labels, rng);
        const ObservedSummary obs = observe(table, labels);
        const double var_classic = classic_variance(obs);
        for (std::size_t e = 0; e < n_effects; ++e) {
          const int l = config.effects[e];
          const double point = estimate_effect(obs, l);
          const double var_improved =
              std::max(var_classic - lower_bound_correction(point, obs.n_total()), 0.0);
          auto& t = totals[e];
          t.sum_var_classic += var_classic;
          t.sum_var_improved += var_improved;
          const double half_classic = z * std::sqrt(var_classic);
          const double half_improved = z * std::sqrt(var_improved);
          t.sum_len_classic += 2.0 * half_classic;
          t.sum_len_improved += 2.0 * half_improved;
          if (std::fabs(point - tau_true[e]) <= half_classic) ++t.cover_classic;
          if (std::fabs(point - tau_true[e]) <= half_improved) ++t.cover_improved;
          if (var_improved > var_classic) ++t.violations;
        }
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<CaseSummary> out;
  out.reserve(n_effects);
  const double reps = static_cast<double>(config.replicates);
  for (std::size_t e = 0; e < n_effects; ++e) {
    const int l = config.effects[e];
    detail::BlockTotals total;
    for (std::int64_t b = 0; b < n_blocks; ++b) {
      const auto& t = block_totals[static_cast<std::size_t>(b)][e];
      total.sum_var_classic += t.sum_var_classic;
      total.sum_var_improved += t.sum_var_improved;
      total.sum_len_classic += t.sum_len_classic;
      total.sum_len_improved += t.sum_len_improved;
      total.cover_classic += t.cover_classic;
      total.cover_improved += t.cover_improved;
      total.violations += t.violations;
    }
    CaseSummary s;
    s.effect = l;
    s.tau_true = tau_true[e];
    s.s2_tau = s2_tau_lemma1(joint, l);
    s.s2_lower_bound = sharp_lower_bound(s.tau_true, joint.total());
    s.true_variance = true_sampling_variance(joint, config.design, l);
    if (s.true_variance > 0.0) {
      s.voe_defined = true;
      s.voe_classic = total.sum_var_classic / reps / s.true_variance - 1.0;
      s.voe_improved = total.sum_var_improved / reps / s.true_variance - 1.0;
    }
    s.len_classic = total.sum_len_classic / reps;
    s.len_improved = total.sum_len_improved / reps;
    s.cover_classic = static_cast<double>(total.cover_classic) / reps;
    s.cover_improved = static_cast<double>(total.cover_improved) / reps;
    s.mc_se_classic = std::sqrt(s.cover_classic * (1.0 - s.cover_classic) / reps);
    s.mc_se_improved = std::sqrt(s.cover_improved * (1.0 - s.cover_improved) / reps);
    s.replicates = config.replicates;
    s.subset_violations = total.violations;
    out.push_back(s);
  }
  return out;
}

// --- Variance-reduction scan ----------------------------------------------------

// Repeatedly draws per-arm success counts n_j^obs ~ iid floor(Uniform(0, n_j))
// (support {0,...,n_j - 1}) on a balanced design and reports the estimated
// effect and the relative variance reduction gamma_1 for each draw.
struct GammaDraw {
  std::array<std::int64_t, 4> n_obs{};
  double tau_hat = 0.0;
  double gamma = 0.0;
};

template <typename Fn>
void gamma_scan(const Design& design, std::int64_t draws, RandomStream& rng, Fn&& per_draw,
                int effect = 1) {
  for (std::int64_t d = 0; d < draws; ++d) {
    GammaDraw g;
    for (int j = 0; j < 4; ++j) {
      g.n_obs[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(design.arm_sizes[static_cast<std::size_t>(j)])));
    }
    const ObservedSummary obs(design.arm_sizes, g.n_obs);
    g.tau_hat = estimate_effect(obs, effect);
    const double correction = lower_bound_correction(g.tau_hat, obs.n_total());
    const double var_classic = classic_variance(obs);
    g.gamma = (correction > 0.0 && var_classic > 0.0) ? correction / var_classic : 0.0;
    per_draw(g);
  }
}

inline std::vector<GammaDraw> gamma_scan_collect(const Design& design, std::int64_t draws,
                                                 RandomStream& rng, int effect = 1) {
  std::vector<GammaDraw> out;
  out.reserve(static_cast<std::size_t>(draws));
  gamma_scan(design, draws, rng, [&](const GammaDraw& g) { out.push_back(g); }, effect);
  return out;
}

}  // namespace neyman_sharp
