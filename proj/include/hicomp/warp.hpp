#pragma once

// Parametric backward warps over normalized coordinates.
//
// Coordinates are normalized to [-1,1]^2 with pixel centers at
// (2j+1)/W - 1 horizontally and (2i+1)/H - 1 vertically. A warp maps each
// output coordinate to a source coordinate, which is sampled bilinearly;
// anything outside the source reads as zero.

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hicomp/error.hpp"
#include "hicomp/image.hpp"

namespace hicomp {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Size2 {
  int height = 0;
  int width = 0;
  friend bool operator==(const Size2&, const Size2&) = default;
};

// Row-major 2x3: x' = m0 x + m1 y + m2, y' = m3 x + m4 y + m5.
struct AffineWarp {
  std::array<double, 6> m{1, 0, 0, 0, 1, 0};

  static AffineWarp identity() { return {}; }
  static AffineWarp translation(double tx, double ty) { return {{1, 0, tx, 0, 1, ty}}; }

  Point2 apply(Point2 p) const { return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]}; }
  friend bool operator==(const AffineWarp&, const AffineWarp&) = default;
};

// 3x3 projective map, stored normalized so that the last entry is 1.
class HomographyWarp {
 public:
  HomographyWarp() = default;

  explicit HomographyWarp(const std::array<double, 9>& h) {
    for (double v : h)
      if (!std::isfinite(v)) throw InvalidArgument("homography: non-finite entry");
    const double det = h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
                       h[2] * (h[3] * h[7] - h[4] * h[6]);
    if (det == 0.0) throw InvalidArgument("homography: singular matrix");
    if (h[8] == 0.0) throw InvalidArgument("homography: last entry is zero, cannot normalize");
    for (int i = 0; i < 9; ++i) h_[i] = h[i] / h[8];
  }

  const std::array<double, 9>& matrix() const noexcept { return h_; }

  // Returns false when the point maps to infinity.
  bool apply(Point2 p, Point2& out) const {
    const double w = h_[6] * p.x + h_[7] * p.y + h_[8];
    if (std::abs(w) < 1e-12) return false;
    out = {(h_[0] * p.x + h_[1] * p.y + h_[2]) / w, (h_[3] * p.x + h_[4] * p.y + h_[5]) / w};
    return true;
  }

  friend bool operator==(const HomographyWarp&, const HomographyWarp&) = default;

 private:
  std::array<double, 9> h_{1, 0, 0, 0, 1, 0, 0, 0, 1};
};

// Thin-plate kernel on squared distance: U = r^2 log(r^2), U(0) = 0.
inline double tps_kernel(double r2) { return r2 > 0.0 ? r2 * std::log(r2) : 0.0; }

// f(p) = affine(p) + sum_k weights_k U(|p - src_k|^2)
class TpsWarp {
 public:
  TpsWarp() = default;

  // Checks the moment conditions: weight columns orthogonal to [1 | src].
  TpsWarp(std::vector<Point2> src, AffineWarp affine, std::vector<Point2> weights)
      : src_(std::move(src)), affine_(affine), weights_(std::move(weights)) {
    if (src_.size() != weights_.size()) throw InvalidArgument("tps: src and weights differ in length");
    if (src_.size() < 3) throw InvalidArgument("tps: need at least 3 control points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syx = 0, syy = 0, scale = 1.0;
    for (std::size_t k = 0; k < src_.size(); ++k) {
      sx += weights_[k].x;
      sy += weights_[k].y;
      sxx += weights_[k].x * src_[k].x;
      sxy += weights_[k].x * src_[k].y;
      syx += weights_[k].y * src_[k].x;
      syy += weights_[k].y * src_[k].y;
      scale = std::max({scale, std::abs(weights_[k].x), std::abs(weights_[k].y)});
    }
    const double worst = std::max({std::abs(sx), std::abs(sy), std::abs(sxx), std::abs(sxy), std::abs(syx),
                                   std::abs(syy)});
    if (worst > 1e-8 * scale) {
      throw InvalidArgument("tps: kernel weights violate the moment conditions (residual " +
                            std::to_string(worst) + ")");
    }
  }

  const std::vector<Point2>& src() const noexcept { return src_; }
  const AffineWarp& affine() const noexcept { return affine_; }
  const std::vector<Point2>& weights() const noexcept { return weights_; }

  double bending_norm() const {
    double s = 0;
    for (const auto& w : weights_) s += w.x * w.x + w.y * w.y;
    return std::sqrt(s);
  }

  Point2 apply(Point2 p) const {
    Point2 out = affine_.apply(p);
    for (std::size_t k = 0; k < src_.size(); ++k) {
      const double dx = p.x - src_[k].x, dy = p.y - src_[k].y;
      const double u = tps_kernel(dx * dx + dy * dy);
      out.x += weights_[k].x * u;
      out.y += weights_[k].y * u;
    }
    return out;
  }

  friend bool operator==(const TpsWarp&, const TpsWarp&) = default;

 private:
  std::vector<Point2> src_;
  AffineWarp affine_;
  std::vector<Point2> weights_;
};

using WarpParams = std::variant<AffineWarp, HomographyWarp, TpsWarp>;

// Maps an output coordinate to its source coordinate; false means "no source".
inline bool map_point(const WarpParams& params, Point2 p, Point2& out) {
  return std::visit(
      [&](const auto& w) -> bool {
        using W = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<W, HomographyWarp>) {
          return w.apply(p, out);
        } else {
          out = w.apply(p);
          return true;
        }
      },
      params);
}

// Solves the thin-plate interpolation system
//   [K + reg I  P] [w]   [dst]
//   [P^T        0] [a] = [ 0 ]
// with P = [1 x y]. Throws SingularSystem on rank deficiency.
inline TpsWarp fit_tps(std::span<const Point2> src, std::span<const Point2> dst, double reg = 0.0) {
  if (src.size() != dst.size()) throw InvalidArgument("fit_tps: src and dst differ in length");
  if (src.size() < 3) throw InvalidArgument("fit_tps: need at least 3 control points");
  if (!(reg >= 0.0) || !std::isfinite(reg)) throw InvalidArgument("fit_tps: reg must be a nonnegative float");
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (!std::isfinite(dst[k].x) || !std::isfinite(dst[k].y)) {
      throw InvalidArgument("fit_tps: target point " + std::to_string(k) + " is not finite");
    }
    if (!(std::abs(src[k].x) <= 1.0 && std::abs(src[k].y) <= 1.0)) {
      throw InvalidArgument("fit_tps: control point " + std::to_string(k) + " outside [-1,1]^2");
    }
  }

  const Eigen::Index n = Eigen::Index(src.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n + 3, n + 3);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dx = src[i].x - src[j].x, dy = src[i].y - src[j].y;
      L(i, j) = tps_kernel(dx * dx + dy * dy);
    }
    L(i, i) += reg;
    L(i, n) = L(n, i) = 1.0;
    L(i, n + 1) = L(n + 1, i) = src[i].x;
    L(i, n + 2) = L(n + 2, i) = src[i].y;
    rhs(i, 0) = dst[i].x;
    rhs(i, 1) = dst[i].y;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
  if (!lu.isInvertible()) {
    throw SingularSystem("fit_tps: singular system (collinear or duplicate control points with reg=0)");
  }
  const Eigen::MatrixXd sol = lu.solve(rhs);
  const double residual = (L * sol - rhs).cwiseAbs().maxCoeff();
  if (!std::isfinite(residual) || residual > 1e-6) {
    throw SingularSystem("fit_tps: ill-conditioned system (residual " + std::to_string(residual) + ")");
  }

  std::vector<Point2> weights(src.size());
  for (Eigen::Index i = 0; i < n; ++i) weights[i] = {sol(i, 0), sol(i, 1)};
  AffineWarp affine{{sol(n + 1, 0), sol(n + 2, 0), sol(n, 0), sol(n + 1, 1), sol(n + 2, 1), sol(n, 1)}};
  return TpsWarp(std::vector<Point2>(src.begin(), src.end()), affine, std::move(weights));
}

namespace detail {

// Pixel index <-> normalized coordinate along an axis of `extent` pixels.
inline double pixel_to_normalized(int index, int extent) { return (2.0 * index + 1.0) / extent - 1.0; }
inline double normalized_to_pixel(double g, int extent) {
  const double p = ((g + 1.0) * extent - 1.0) / 2.0;
  // Absorb round-off so integer-aligned maps copy pixels exactly.
  const double r = std::nearbyint(p);
  return std::abs(p - r) < 1e-9 ? r : p;
}

// Bilinear read of all channels at pixel coordinate (px, py) with zero fill.
template <typename T>
void sample_bilinear(std::span<const T> src, int height, int width, int channels, double px, double py,
                     std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (!(px > -1.0 && px < width && py > -1.0 && py < height)) return;
  const int x0 = int(std::floor(px)), y0 = int(std::floor(py));
  const double fx = px - x0, fy = py - y0;
  const int xs[2] = {x0, x0 + 1};
  const int ys[2] = {y0, y0 + 1};
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};
  for (int a = 0; a < 2; ++a) {
    if (ys[a] < 0 || ys[a] >= height || wy[a] == 0.0) continue;
    for (int b = 0; b < 2; ++b) {
      if (xs[b] < 0 || xs[b] >= width || wx[b] == 0.0) continue;
      const double w = wy[a] * wx[b];
      const std::size_t base = (std::size_t(ys[a]) * width + xs[b]) * channels;
      for (int c = 0; c < channels; ++c) out[c] += w * double(src[base + c]);
    }
  }
}

template <typename T>
void warp_buffer(std::span<const T> src, int src_h, int src_w, int channels, const WarpParams& params,
                 Size2 out_size, std::span<T> dst) {
  std::vector<double> px(channels);
  for (int i = 0; i < out_size.height; ++i) {
    const double gy = pixel_to_normalized(i, out_size.height);
    for (int j = 0; j < out_size.width; ++j) {
      const double gx = pixel_to_normalized(j, out_size.width);
      Point2 s;
      const std::size_t base = (std::size_t(i) * out_size.width + j) * channels;
      if (!map_point(params, {gx, gy}, s) || !std::isfinite(s.x) || !std::isfinite(s.y)) {
        for (int c = 0; c < channels; ++c) dst[base + c] = T(0);
        continue;
      }
      sample_bilinear<T>(src, src_h, src_w, channels, normalized_to_pixel(s.x, src_w),
                         normalized_to_pixel(s.y, src_h), px);
      for (int c = 0; c < channels; ++c) dst[base + c] = T(clamp01(px[c]));
    }
  }
}

}  // namespace detail

template <typename T>
basic_image<T> warp_image(const basic_image<T>& img, const WarpParams& params, Size2 out_size) {
  basic_image<T> out(out_size.height, out_size.width, img.channels());
  detail::warp_buffer<T>(img.data(), img.height(), img.width(), img.channels(), params, out_size, out.data());
  return out;
}

template <typename T>
basic_mask<T> warp_image(const basic_mask<T>& mask, const WarpParams& params, Size2 out_size) {
  basic_mask<T> out(out_size.height, out_size.width);
  detail::warp_buffer<T>(mask.data(), mask.height(), mask.width(), 1, params, out_size, out.data());
  return out;
}

// Same-size convenience overload.
template <typename Raster>
Raster warp_image(const Raster& r, const WarpParams& params) {
  return warp_image(r, params, Size2{r.height(), r.width()});
}

// --- JSON ------------------------------------------------------------------
//   {"type":"affine","m":[6]} | {"type":"homography","m":[9]} |
//   {"type":"tps","src":[[x,y]...],"affine":[6],"weights":[[wx,wy]...]}

inline nlohmann::json warp_to_json(const WarpParams& params) {
  using nlohmann::json;
  return std::visit(
      [](const auto& w) -> json {
        using W = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<W, AffineWarp>) {
          return {{"type", "affine"}, {"m", w.m}};
        } else if constexpr (std::is_same_v<W, HomographyWarp>) {
          return {{"type", "homography"}, {"m", w.matrix()}};
        } else {
          json src = json::array(), weights = json::array();
          for (const auto& p : w.src()) src.push_back({p.x, p.y});
          for (const auto& p : w.weights()) weights.push_back({p.x, p.y});
          return {{"type", "tps"}, {"src", src}, {"affine", w.affine().m}, {"weights", weights}};
        }
      },
      params);
}

namespace detail {

template <std::size_t N>
std::array<double, N> json_fixed_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != N) {
    throw InvalidArgument(std::string("warp: \"") + key + "\" must be an array of " + std::to_string(N) +
                          " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[key][i].is_number()) throw InvalidArgument(std::string("warp: \"") + key + "\" has a non-number");
    out[i] = j[key][i].get<double>();
    if (!std::isfinite(out[i])) throw InvalidArgument(std::string("warp: \"") + key + "\" has a non-finite value");
  }
  return out;
}

inline std::vector<Point2> json_points(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw InvalidArgument(std::string("warp: \"") + key + "\" must be an array of [x,y] pairs");
  }
  std::vector<Point2> out;
  for (const auto& p : j[key]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw InvalidArgument(std::string("warp: \"") + key + "\" entries must be [x,y] number pairs");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

}  // namespace detail

inline WarpParams warp_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw InvalidArgument("warp: expected an object with a string \"type\"");
  }
  const auto type = j["type"].get<std::string>();
  if (type == "affine") return AffineWarp{detail::json_fixed_array<6>(j, "m")};
  if (type == "homography") return HomographyWarp(detail::json_fixed_array<9>(j, "m"));
  if (type == "tps") {
    return TpsWarp(detail::json_points(j, "src"), AffineWarp{detail::json_fixed_array<6>(j, "affine")},
                   detail::json_points(j, "weights"));
  }
  throw InvalidArgument("warp: unknown type \"" + type + "\"");
}

}  // namespace hicomp
