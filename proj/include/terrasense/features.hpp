// Handcrafted 16-dim descriptor of an 8x8 pixel patch. These frozen
// features play the role of a pretrained backbone: the vision module
// only ever trains a linear head on top of them.
//
// Layout: [0..2] channel means, [3..5] channel stds,
//         [6..13] gradient-orientation histogram of luminance (8 bins,
//         magnitude-weighted, normalized), [14] mean 2x2-block variance,
//         [15] variance of 4x4-block means.
#pragma once

#include <array>
#include <cmath>

#include "terrasense/image.hpp"

namespace terra {

inline constexpr int kPatch = 8;
inline constexpr int kFeatureDim = 16;

inline double luminance(const Rgb& c) {
  return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
}

// Patch anchored at (row0, col0); caller guarantees it fits in the image.
inline std::array<float, kFeatureDim> patch_features(const Image& img,
                                                     int row0, int col0) {
  std::array<float, kFeatureDim> f{};

  double sum[3] = {0, 0, 0}, sumsq[3] = {0, 0, 0};
  double lum[kPatch][kPatch];
  for (int r = 0; r < kPatch; ++r) {
    for (int c = 0; c < kPatch; ++c) {
      const Rgb& px = img.at(row0 + r, col0 + c);
      double ch[3] = {double(px.r), double(px.g), double(px.b)};
      for (int k = 0; k < 3; ++k) {
        sum[k] += ch[k];
        sumsq[k] += ch[k] * ch[k];
      }
      lum[r][c] = luminance(px);
    }
  }
  const double inv_n = 1.0 / (kPatch * kPatch);
  for (int k = 0; k < 3; ++k) {
    double mean = sum[k] * inv_n;
    double var = std::max(0.0, sumsq[k] * inv_n - mean * mean);
    f[k] = static_cast<float>(mean);
    f[3 + k] = static_cast<float>(std::sqrt(var));
  }

  // Magnitude-weighted orientation histogram over interior pixels.
  double hist[8] = {0};
  double total = 0.0;
  for (int r = 1; r < kPatch - 1; ++r) {
    for (int c = 1; c < kPatch - 1; ++c) {
      double gx = lum[r][c + 1] - lum[r][c - 1];
      double gy = lum[r + 1][c] - lum[r - 1][c];
      double mag = std::sqrt(gx * gx + gy * gy);
      if (mag <= 0.0) continue;
      double ang = std::atan2(gy, gx);  // [-pi, pi]
      int bin = static_cast<int>((ang + kPi) / (2.0 * kPi) * 8.0);
      if (bin > 7) bin = 7;
      if (bin < 0) bin = 0;
      hist[bin] += mag;
      total += mag;
    }
  }
  if (total > 0.0)
    for (int b = 0; b < 8; ++b) f[6 + b] = static_cast<float>(hist[b] / total);

  // Fine-grain energy: mean variance within 2x2 blocks.
  double fine = 0.0;
  for (int br = 0; br < kPatch; br += 2) {
    for (int bc = 0; bc < kPatch; bc += 2) {
      double m = 0, m2 = 0;
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
          double v = lum[br + r][bc + c];
          m += v;
          m2 += v * v;
        }
      m *= 0.25;
      fine += std::max(0.0, m2 * 0.25 - m * m);
    }
  }
  f[14] = static_cast<float>(fine / 16.0);

  // Coarse structure: variance of the four 4x4 block means.
  double means[4];
  int idx = 0;
  for (int br = 0; br < kPatch; br += 4) {
    for (int bc = 0; bc < kPatch; bc += 4) {
      double m = 0;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m += lum[br + r][bc + c];
      means[idx++] = m / 16.0;
    }
  }
  double mm = (means[0] + means[1] + means[2] + means[3]) * 0.25;
  double mv = 0;
  for (double m : means) mv += (m - mm) * (m - mm);
  f[15] = static_cast<float>(mv * 0.25);

  return f;
}

}  // namespace terra
