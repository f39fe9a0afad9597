#pragma once

// Edge-aware guided filter: the output is a local linear function of the
// guide, with per-window coefficients from a ridge regression of the input
// on the guide. Windows are (2r+1)^2 squares clipped at the border and
// normalized by their in-bounds pixel count.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hicomp/error.hpp"
#include "hicomp/image.hpp"

namespace hicomp {

struct FilterConfig {
  int radius = 16;
  double eps = 1e-7;

  void validate() const {
    if (radius < 1) throw InvalidArgument("guided filter radius must be >= 1, got " + std::to_string(radius));
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw InvalidArgument("guided filter eps must be finite and >= 0");
  }
};

// Variances below this are float cancellation noise on [0,1] data and are
// treated as exactly zero.
inline constexpr double kVarianceFloor = 1e-12;

// Number of in-bounds pixels of the clipped window around each pixel.
inline Plane<double> window_count(int height, int width, int radius) {
  Plane<double> n(height, width);
  for (int y = 0; y < height; ++y) {
    const int ny = std::min(y + radius, height - 1) - std::max(y - radius, 0) + 1;
    for (int x = 0; x < width; ++x) {
      const int nx = std::min(x + radius, width - 1) - std::max(x - radius, 0) + 1;
      n.at(y, x) = double(ny) * nx;
    }
  }
  return n;
}

// Mean over the clipped (2r+1)^2 window. Separable prefix sums in double.
template <typename T>
Plane<double> box_mean(const Plane<T>& in, int radius) {
  if (radius < 1) throw InvalidArgument("box_mean radius must be >= 1");
  const int h = in.height, w = in.width;
  Plane<double> rows(h, w);
  std::vector<double> prefix(std::size_t(std::max(h, w)) + 1);
  for (int y = 0; y < h; ++y) {
    prefix[0] = 0.0;
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + double(in.at(y, x));
    for (int x = 0; x < w; ++x) {
      rows.at(y, x) = prefix[std::min(x + radius, w - 1) + 1] - prefix[std::max(x - radius, 0)];
    }
  }
  Plane<double> out(h, w);
  for (int x = 0; x < w; ++x) {
    prefix[0] = 0.0;
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + rows.at(y, x);
    for (int y = 0; y < h; ++y) {
      out.at(y, x) = prefix[std::min(y + radius, h - 1) + 1] - prefix[std::max(y - radius, 0)];
    }
  }
  const auto count = window_count(h, w, radius);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= count.data[i];
  return out;
}

struct WindowStats {
  Plane<double> mean_guide;
  Plane<double> mean_input;
  Plane<double> var_guide;
  Plane<double> cov_guide_input;
  Plane<double> a;
  Plane<double> b;
  Plane<double> window_count;
};

template <typename T>
WindowStats window_stats(const Plane<T>& guide, const Plane<T>& input, const FilterConfig& cfg) {
  cfg.validate();
  if (guide.height != input.height || guide.width != input.width) {
    throw DimensionMismatch("guide and input planes differ in size");
  }
  const int h = guide.height, w = guide.width;
  Plane<double> ii(h, w), ip(h, w);
  for (std::size_t k = 0; k < guide.data.size(); ++k) {
    const double g = double(guide.data[k]);
    ii.data[k] = g * g;
    ip.data[k] = g * double(input.data[k]);
  }
  WindowStats s;
  s.mean_guide = box_mean(guide, cfg.radius);
  s.mean_input = box_mean(input, cfg.radius);
  const auto mean_ii = box_mean(ii, cfg.radius);
  const auto mean_ip = box_mean(ip, cfg.radius);
  s.var_guide = Plane<double>(h, w);
  s.cov_guide_input = Plane<double>(h, w);
  s.a = Plane<double>(h, w);
  s.b = Plane<double>(h, w);
  s.window_count = window_count(h, w, cfg.radius);
  for (std::size_t k = 0; k < s.a.data.size(); ++k) {
    const double mu = s.mean_guide.data[k];
    const double pbar = s.mean_input.data[k];
    double var = mean_ii.data[k] - mu * mu;
    if (var < kVarianceFloor) var = 0.0;
    const double cov = mean_ip.data[k] - mu * pbar;
    s.var_guide.data[k] = var;
    s.cov_guide_input.data[k] = cov;
    const double denom = var + cfg.eps;
    // Flat window with no regularization: fall back to the input mean.
    s.a.data[k] = denom > 0.0 ? cov / denom : 0.0;
    s.b.data[k] = pbar - s.a.data[k] * mu;
  }
  return s;
}

// Single-channel filter before clamping: mean(a) * guide + mean(b).
template <typename T>
Plane<double> guided_filter_plane(const Plane<T>& guide, const Plane<T>& input, const FilterConfig& cfg) {
  const auto s = window_stats(guide, input, cfg);
  const auto mean_a = box_mean(s.a, cfg.radius);
  const auto mean_b = box_mean(s.b, cfg.radius);
  Plane<double> out(guide.height, guide.width);
  for (std::size_t k = 0; k < out.data.size(); ++k) {
    out.data[k] = mean_a.data[k] * double(guide.data[k]) + mean_b.data[k];
  }
  return out;
}

// Per-channel pre-clamp outputs; channel k of the guide drives channel k of the input.
template <typename T>
std::vector<Plane<double>> guided_filter_unclamped(const basic_image<T>& guide, const basic_image<T>& input,
                                                   const FilterConfig& cfg) {
  cfg.validate();
  if (!guide.same_shape(input)) throw DimensionMismatch("guide and input differ in shape");
  std::vector<Plane<double>> out;
  out.reserve(guide.channels());
  for (int c = 0; c < guide.channels(); ++c) {
    out.push_back(guided_filter_plane(channel_plane(guide, c), channel_plane(input, c), cfg));
  }
  return out;
}

// `guide` supplies edges and texture (the composed image), `input` supplies
// the adapted appearance. Output clamped to [0,1].
template <typename T>
basic_image<T> guided_filter(const basic_image<T>& guide, const basic_image<T>& input, const FilterConfig& cfg = {}) {
  const auto planes = guided_filter_unclamped(guide, input, cfg);
  basic_image<T> out(guide.height(), guide.width(), guide.channels());
  for (int c = 0; c < guide.channels(); ++c) set_channel_clamped(out, c, planes[c]);
  return out;
}

}  // namespace hicomp
