#pragma once

// Reference implementations used only by the tests. Each one follows the
// textbook definition directly and shares no code path with the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

// Binary masks as per-pixel bool grids.
using BoolGrid = std::vector<bool>;

// Boolean occlusion set algebra for one order (priority list):
//   visible(p_j) = m_{p_j} - union_{k<j} (m_{p_j} intersect m_{p_k})
// Returned per foreground index.
inline std::vector<BoolGrid> visible_sets(const std::vector<BoolGrid>& masks, const std::vector<int>& priority) {
  const std::size_t n = masks[0].size();
  std::vector<BoolGrid> out(masks.size(), BoolGrid(n, false));
  for (std::size_t pos = 0; pos < priority.size(); ++pos) {
    const int j = priority[pos];
    for (std::size_t px = 0; px < n; ++px) {
      bool covered = false;
      for (std::size_t k = 0; k < pos; ++k) covered = covered || (masks[j][px] && masks[priority[k]][px]);
      out[j][px] = masks[j][px] && !covered;
    }
  }
  return out;
}

// C = sum_j FG_j * visible_j + BG * (1 - union m), single channel.
inline std::vector<double> compose_one_hot(const std::vector<double>& bg, const std::vector<std::vector<double>>& fgs,
                                           const std::vector<BoolGrid>& masks, const std::vector<int>& priority) {
  const auto vis = visible_sets(masks, priority);
  std::vector<double> out(bg.size());
  for (std::size_t px = 0; px < bg.size(); ++px) {
    bool any = false;
    double v = 0.0;
    for (std::size_t j = 0; j < masks.size(); ++j) {
      any = any || masks[j][px];
      if (vis[j][px]) v += fgs[j][px];
    }
    out[px] = v + (any ? 0.0 : bg[px]);
  }
  return out;
}

// Naive clipped-window mean.
inline std::vector<double> box_mean(const std::vector<double>& img, int h, int w, int r) {
  std::vector<double> out(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      int n = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
          s += img[yy * w + xx];
          ++n;
        }
      }
      out[y * w + x] = s / n;
    }
  }
  return out;
}

// Guided filter by explicit per-window ridge regression:
//   min_{a,b} sum_{i in w_k} (a I_i + b - p_i)^2 + eps a^2   (eps per pixel)
// solved from its 2x2 normal equations, then coefficients averaged over the
// windows containing each pixel.
inline std::vector<double> guided_filter(const std::vector<double>& guide, const std::vector<double>& input, int h,
                                         int w, int r, double eps) {
  std::vector<double> a(guide.size()), b(guide.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sii = 0, si = 0, sip = 0, sp = 0;
      int n = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
          const double gi = guide[yy * w + xx], pi = input[yy * w + xx];
          sii += gi * gi;
          si += gi;
          sip += gi * pi;
          sp += pi;
          ++n;
        }
      }
      Eigen::Matrix2d normal;
      normal << sii + n * eps, si, si, double(n);
      const Eigen::Vector2d sol = normal.fullPivLu().solve(Eigen::Vector2d(sip, sp));
      a[y * w + x] = sol(0);
      b[y * w + x] = sol(1);
    }
  }
  const auto abar = box_mean(a, h, w, r);
  const auto bbar = box_mean(b, h, w, r);
  std::vector<double> out(guide.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = abar[i] * guide[i] + bbar[i];
  return out;
}

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace oracle
