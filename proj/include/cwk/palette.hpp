#pragma once

#include <array>
#include <stdexcept>
#include <vector>

namespace cwk {

// Per-class constant colors shared by the procedural scene renderer and the
// procedural segmenter. Channel 0 separates classes by 1/n_cl, so nearest-color
// decoding is exact whenever per-pixel noise stays below 1/(2*n_cl).
inline std::vector<std::array<float, 3>> class_palette(int n_cl) {
  if (n_cl < 1 || n_cl > 254)
    throw std::invalid_argument("class_palette: n_cl in [1, 254]");
  std::vector<std::array<float, 3>> colors(n_cl);
  for (int c = 0; c < n_cl; ++c) {
    float g = (static_cast<float>(c) + 0.5f) / static_cast<float>(n_cl);
    colors[c] = {g, 1.0f - g, (static_cast<float>((c * 5) % n_cl) + 0.5f) /
                                  static_cast<float>(n_cl)};
  }
  return colors;
}

}  // namespace cwk
