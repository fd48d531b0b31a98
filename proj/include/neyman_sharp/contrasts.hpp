#pragma once

#include <array>
#include <stdexcept>

namespace neyman_sharp {

// The four treatment combinations of a 2x2 factorial design are indexed
// j = 1..4 in the fixed order (-1,-1), (-1,1), (1,-1), (1,1) of the two
// factor levels. kModelMatrix[l] is column h_l of the model matrix across
// arms z_1..z_4; h_1 and h_2 define the two main effects, h_3 = h_1 * h_2
// (elementwise) the interaction.
inline constexpr std::array<std::array<int, 4>, 4> kModelMatrix = {{
    {{1, 1, 1, 1}},
    {{-1, -1, 1, 1}},
    {{-1, 1, -1, 1}},
    {{1, -1, -1, 1}},
}};

inline const std::array<int, 4>& model_column(int l) {
  if (l < 0 || l > 3) {
    throw std::invalid_argument("model_column: column index must be in 0..3");
  }
  return kModelMatrix[static_cast<std::size_t>(l)];
}

// A factorial-effect contrast: two arms enter with weight -1, two with +1.
struct Contrast {
  int effect = 0;                     // l in {1,2,3}
  std::array<int, 4> h{};             // +/-1 per arm, arm order z_1..z_4
  std::array<int, 2> arms_minus{};    // 0-based arms with h_j = -1
  std::array<int, 2> arms_plus{};     // 0-based arms with h_j = +1
};

inline Contrast contrast(int l) {
  if (l < 1 || l > 3) {
    throw std::invalid_argument("contrast: effect index must be 1, 2 or 3");
  }
  Contrast c;
  c.effect = l;
  c.h = kModelMatrix[static_cast<std::size_t>(l)];
  int m = 0, p = 0;
  for (int j = 0; j < 4; ++j) {
    if (c.h[static_cast<std::size_t>(j)] < 0) {
      c.arms_minus[static_cast<std::size_t>(m++)] = j;
    } else {
      c.arms_plus[static_cast<std::size_t>(p++)] = j;
    }
  }
  return c;
}

}  // namespace neyman_sharp
