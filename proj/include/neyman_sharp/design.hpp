#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace neyman_sharp {

// Arm sizes of a completely randomized 2x2 factorial experiment.
// Every arm needs at least two units because the variance estimators
// divide by n_j - 1.
struct Design {
  std::array<std::int64_t, 4> arm_sizes{};
  std::int64_t n_total = 0;

  Design() = default;

  explicit Design(const std::array<std::int64_t, 4>& sizes) : arm_sizes(sizes) {
    for (int j = 0; j < 4; ++j) {
      if (arm_sizes[static_cast<std::size_t>(j)] < 2) {
        throw std::invalid_argument("Design: arm " + std::to_string(j + 1) +
                                    " has fewer than 2 units");
      }
    }
    n_total = std::accumulate(arm_sizes.begin(), arm_sizes.end(), std::int64_t{0});
  }
};

// Per-arm sample sizes and success counts. All estimators are functions of
// this summary alone.
struct ObservedSummary {
  std::array<std::int64_t, 4> arm_sizes{};
  std::array<std::int64_t, 4> successes{};

  ObservedSummary() = default;

  ObservedSummary(const std::array<std::int64_t, 4>& sizes,
                  const std::array<std::int64_t, 4>& obs)
      : arm_sizes(sizes), successes(obs) {
    for (int j = 0; j < 4; ++j) {
      const auto js = static_cast<std::size_t>(j);
      if (arm_sizes[js] < 1) {
        throw std::invalid_argument("ObservedSummary: arm " + std::to_string(j + 1) +
                                    " is empty");
      }
      if (successes[js] < 0 || successes[js] > arm_sizes[js]) {
        throw std::invalid_argument("ObservedSummary: arm " + std::to_string(j + 1) +
                                    " has success count outside [0, n_j]");
      }
    }
  }

  double arm_mean(int j) const {
    const auto js = static_cast<std::size_t>(j);
    return static_cast<double>(successes[js]) / static_cast<double>(arm_sizes[js]);
  }

  std::array<double, 4> arm_means() const {
    return {arm_mean(0), arm_mean(1), arm_mean(2), arm_mean(3)};
  }

  std::int64_t n_total() const {
    return std::accumulate(arm_sizes.begin(), arm_sizes.end(), std::int64_t{0});
  }

  friend bool operator==(const ObservedSummary&, const ObservedSummary&) = default;
};

}  // namespace neyman_sharp
