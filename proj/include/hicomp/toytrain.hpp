#pragma once

// Desk-scale recovery harness: synthetic scenes with known ground truth, and
// plain gradient descent through the composition pipeline to recover the
// occlusion order (analytic gradients on the logits) or the foreground
// translations (central differences).

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hicomp/error.hpp"
#include "hicomp/guided_filter.hpp"
#include "hicomp/hierarchy.hpp"
#include "hicomp/image.hpp"
#include "hicomp/scene.hpp"
#include "hicomp/warp.hpp"

namespace hicomp {

struct ToyScene {
  // Problem input: background, solid-color foregrounds with their object-space
  // masks, identity warps and uniform (zero) logits.
  SceneSpec spec;
  Image gt_composite;
  std::size_t gt_order_index = 0;
  std::vector<WarpParams> gt_warps;
  std::uint64_t seed = 0;
};

struct OptimReport {
  std::size_t steps = 0;
  std::vector<double> loss_curve;  // loss before each update
  double final_loss = 0.0;
  HierarchyWeights final_weights;
  std::vector<WarpParams> final_warps;
  std::size_t recovered_order_index = 0;
  std::size_t gt_order_index = 0;
  bool order_identifiable = true;
  double warp_error = 0.0;  // max translation error over foregrounds, normalized units
};

struct ToySceneConfig {
  double max_translation = 0.15;     // per axis, normalized units
  double edge_softness_px = 2.0;     // width of the anti-aliased mask ramp
  double min_overlap_fraction = 0.01;
  HierarchyConfig hierarchy;
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct ShapeDesc {
  int kind = 0;  // 0 disk, 1 rectangle, 2 triangle
  Point2 center;
  double radius = 0.0;
  double aspect = 1.0;
  double angle = 0.0;

  // Approximate signed distance in normalized units, negative inside.
  double distance(Point2 p) const {
    const double dx = p.x - center.x, dy = p.y - center.y;
    const double c = std::cos(angle), s = std::sin(angle);
    const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
    switch (kind) {
      case 0:
        return std::hypot(dx, dy) - radius;
      case 1:
        return std::max(std::abs(lx) - radius * 0.85, std::abs(ly) - radius * 0.85 * aspect);
      default: {
        double d = -1e9;
        for (int e = 0; e < 3; ++e) {
          const double a = angle + std::numbers::pi / 2.0 + e * 2.0 * std::numbers::pi / 3.0;
          d = std::max(d, std::cos(a) * dx + std::sin(a) * dy - radius * 0.5);
        }
        return d;
      }
    }
  }
};

inline MaskMap render_shape(const ShapeDesc& shape, int size, double softness_px) {
  MaskMap m(size, size);
  const double px_per_unit = size / 2.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Point2 p{pixel_to_normalized(x, size), pixel_to_normalized(y, size)};
      const double d_px = shape.distance(p) * px_per_unit;
      m.at(y, x) = float(clamp01(0.5 - d_px / softness_px));
    }
  }
  return m;
}

inline double mask_mass(const basic_mask<double>& m) {
  double s = 0.0;
  for (double v : m.data()) s += v;
  return s;
}

// Rasters promoted to double once; every optimization step composes from these.
struct PreparedScene {
  basic_image<double> background;
  std::vector<basic_image<double>> fgs;
  std::vector<basic_mask<double>> masks;
  Size2 size;
  basic_image<double> target;
};

inline std::vector<double> gt_translations(const ToyScene& scene) {
  std::vector<double> t;
  for (const auto& w : scene.gt_warps) {
    const auto* a = std::get_if<AffineWarp>(&w);
    if (!a) throw InvalidArgument("toy scenes carry affine ground-truth warps");
    t.push_back(a->m[2]);
    t.push_back(a->m[5]);
  }
  return t;
}

inline std::vector<WarpParams> translation_warps(std::span<const double> t) {
  std::vector<WarpParams> out;
  for (std::size_t j = 0; j + 1 < t.size(); j += 2) out.push_back(AffineWarp::translation(t[j], t[j + 1]));
  return out;
}

inline basic_image<double> compose_prepared(const PreparedScene& p, std::span<const WarpParams> warps,
                                            const HierarchyWeights& w, const HierarchyConfig& cfg) {
  std::vector<basic_image<double>> fgs;
  std::vector<basic_mask<double>> masks;
  for (std::size_t j = 0; j < p.fgs.size(); ++j) {
    fgs.push_back(warp_image(p.fgs[j], warps[j], p.size));
    masks.push_back(warp_image(p.masks[j], warps[j], p.size));
  }
  return compose_hierarchy<double>(p.background, fgs, masks, w, cfg).image;
}

inline double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / double(a.size());
}

inline PreparedScene prepare(const ToyScene& scene, const HierarchyConfig& cfg) {
  PreparedScene p;
  p.background = scene.spec.background.cast<double>();
  p.size = scene.spec.output_size;
  for (const auto& fg : scene.spec.foregrounds) {
    p.fgs.push_back(fg.image.cast<double>());
    p.masks.push_back(fg.mask.cast<double>());
  }
  p.target = compose_prepared(p, scene.gt_warps, HierarchyWeights::one_hot(p.fgs.size(), scene.gt_order_index), cfg);
  return p;
}

}  // namespace detail

// Builds a ToyScene from explicit rasters; gt_composite is derived.
inline ToyScene make_toy_scene(Image background, std::vector<Image> fgs, std::vector<MaskMap> masks,
                               std::vector<WarpParams> gt_warps, std::size_t gt_order_index, std::uint64_t seed = 0,
                               const HierarchyConfig& cfg = {}) {
  if (fgs.size() != masks.size() || fgs.size() != gt_warps.size()) {
    throw InvalidArgument("make_toy_scene: foreground, mask and warp counts differ");
  }
  check_foreground_count(fgs.size(), cfg);
  ToyScene scene;
  scene.seed = seed;
  scene.gt_order_index = gt_order_index;
  scene.gt_warps = std::move(gt_warps);
  scene.spec.output_size = {background.height(), background.width()};
  scene.spec.background = std::move(background);
  for (std::size_t j = 0; j < fgs.size(); ++j) {
    scene.spec.foregrounds.push_back({std::move(fgs[j]), std::move(masks[j]), AffineWarp::identity()});
  }
  scene.spec.hierarchy = {HierarchySpec::Kind::Logits, std::vector<double>(factorial(scene.spec.foregrounds.size()), 0.0)};
  validate_scene(scene.spec, cfg);

  std::vector<Image> warped_fgs;
  std::vector<MaskMap> warped_masks;
  for (std::size_t j = 0; j < scene.spec.foregrounds.size(); ++j) {
    warped_fgs.push_back(warp_image(scene.spec.foregrounds[j].image, scene.gt_warps[j], scene.spec.output_size));
    warped_masks.push_back(warp_image(scene.spec.foregrounds[j].mask, scene.gt_warps[j], scene.spec.output_size));
  }
  scene.gt_composite =
      compose_hierarchy<float>(scene.spec.background, warped_fgs, warped_masks,
                               HierarchyWeights::one_hot(warped_fgs.size(), gt_order_index), cfg)
          .image;
  return scene;
}

// Smallest pairwise overlap of the warped masks, each as a fraction of the
// smaller shape's mass. `exclusive` discounts pixels covered by any third shape.
inline double min_pairwise_overlap(std::span<const basic_mask<double>> masks, bool exclusive) {
  double worst = 1.0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::size_t j = i + 1; j < masks.size(); ++j) {
      double both = 0.0;
      for (std::size_t px = 0; px < masks[i].pixel_count(); ++px) {
        double v = masks[i].data()[px] * masks[j].data()[px];
        if (exclusive) {
          for (std::size_t k = 0; k < masks.size(); ++k)
            if (k != i && k != j) v *= 1.0 - masks[k].data()[px];
        }
        both += v;
      }
      const double area = std::min(detail::mask_mass(masks[i]), detail::mask_mass(masks[j]));
      worst = std::min(worst, area > 0.0 ? both / area : 0.0);
    }
  }
  return worst;
}

// Deterministic in `seed`: smooth textured background, M solid-color shapes
// that overlap pairwise once translated, random ground-truth order.
inline ToyScene generate_scene(std::uint64_t seed, std::size_t m, int size, const ToySceneConfig& cfg = {}) {
  check_foreground_count(m, cfg.hierarchy);
  if (size < 8) throw InvalidArgument("toy scenes need size >= 8");
  std::mt19937_64 rng(seed);
  using detail::uniform;

  std::array<double, 3> base{}, gx{}, gy{}, phase{};
  for (int c = 0; c < 3; ++c) {
    base[c] = uniform(rng, 0.3, 0.7);
    gx[c] = uniform(rng, -0.15, 0.15);
    gy[c] = uniform(rng, -0.15, 0.15);
    phase[c] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  const double amp = uniform(rng, 0.03, 0.07);
  const double freq = uniform(rng, 1.5, 3.5) * std::numbers::pi;
  Image bg(size, size, 3);
  for (int y = 0; y < size; ++y) {
    const double v = detail::pixel_to_normalized(y, size);
    for (int x = 0; x < size; ++x) {
      const double u = detail::pixel_to_normalized(x, size);
      for (int c = 0; c < 3; ++c) {
        const double val = base[c] + gx[c] * u + gy[c] * v + amp * std::sin(freq * u + phase[c]) * std::cos(freq * v);
        bg.at(y, x, c) = float(detail::clamp01(val));
      }
    }
  }

  auto distance = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
  };
  std::vector<std::array<double, 3>> colors;
  while (colors.size() < m) {
    std::array<double, 3> col{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)};
    bool ok = distance(col, base) >= 0.3;
    for (const auto& other : colors) ok = ok && distance(col, other) >= 0.4;
    if (ok) colors.push_back(col);
  }

  std::vector<MaskMap> masks;
  std::vector<WarpParams> warps;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw Error("generate_scene: could not place overlapping shapes");
    masks.clear();
    warps.clear();
    std::vector<basic_mask<double>> warped;
    for (std::size_t j = 0; j < m; ++j) {
      detail::ShapeDesc shape;
      shape.kind = int(std::uniform_int_distribution<int>(0, 2)(rng));
      shape.center = {uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15)};
      shape.radius = uniform(rng, 0.3, 0.42);
      shape.aspect = uniform(rng, 0.6, 1.0);
      shape.angle = uniform(rng, 0.0, std::numbers::pi);
      masks.push_back(detail::render_shape(shape, size, cfg.edge_softness_px));
      warps.push_back(AffineWarp::translation(uniform(rng, -cfg.max_translation, cfg.max_translation),
                                              uniform(rng, -cfg.max_translation, cfg.max_translation)));
      warped.push_back(warp_image(masks.back().cast<double>(), warps.back()));
    }
    if (m == 1) break;
    if (min_pairwise_overlap(warped, false) > cfg.min_overlap_fraction &&
        min_pairwise_overlap(warped, true) > cfg.min_overlap_fraction) {
      break;
    }
  }

  std::vector<Image> fgs;
  for (const auto& col : colors) {
    Image fg(size, size, 3);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        for (int c = 0; c < 3; ++c) fg.at(y, x, c) = float(col[c]);
    fgs.push_back(std::move(fg));
  }
  const auto gt_order =
      std::size_t(std::uniform_int_distribution<std::size_t>(0, factorial(m) - 1)(rng));
  return make_toy_scene(std::move(bg), std::move(fgs), std::move(masks), std::move(warps), gt_order, seed,
                        cfg.hierarchy);
}

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h per coordinate.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::span<const double> params, double h) {
  if (!(h > 0.0)) throw InvalidArgument("numeric_gradient: step must be positive");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = f(p);
    p[i] = orig - h;
    const double down = f(p);
    p[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteValue("numeric_gradient: non-finite function value along coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Photometric MSE of the hierarchy composite against the ground truth, as a
// function of the logits, with warps frozen at ground truth. Gradients come
// from the affine dependence on the weights and the softmax Jacobian.
class HierarchyObjective {
 public:
  explicit HierarchyObjective(const ToyScene& scene, const HierarchyConfig& cfg = {})
      : cfg_(cfg), prepared_(detail::prepare(scene, cfg)) {
    const std::size_t m = prepared_.fgs.size();
    for (std::size_t j = 0; j < m; ++j) {
      warped_fgs_.push_back(warp_image(prepared_.fgs[j], scene.gt_warps[j], prepared_.size));
      warped_masks_.push_back(warp_image(prepared_.masks[j], scene.gt_warps[j], prepared_.size));
    }
    for (const auto& order : enumerate_orders(m, cfg)) {
      const auto o = occlusion_result<double>(warped_fgs_, warped_masks_, order);
      occlusion_.emplace_back(o.data().begin(), o.data().end());
    }
    const int ch = prepared_.background.channels();
    background_term_.resize(prepared_.background.size());
    for (std::size_t px = 0; px < prepared_.background.pixel_count(); ++px) {
      double uncovered = 1.0;
      for (const auto& mk : warped_masks_) uncovered *= 1.0 - mk.data()[px];
      for (int c = 0; c < ch; ++c) background_term_[px * ch + c] = uncovered * prepared_.background.data()[px * ch + c];
    }
  }

  std::size_t order_count() const noexcept { return occlusion_.size(); }

  // Loss through the full composition pipeline (independent of the affine decomposition).
  double loss(std::span<const double> logits) const {
    const auto c = compose_hierarchy<double>(prepared_.background, warped_fgs_, warped_masks_,
                                             softmax_weights(logits), cfg_);
    return detail::mse(c.image.data(), prepared_.target.data());
  }

  // Loss and analytic gradient with respect to the logits.
  double loss_and_gradient(std::span<const double> logits, std::vector<double>& grad) const {
    const auto w = softmax_weights(logits);
    const std::size_t n = background_term_.size();
    std::vector<double> residual(background_term_);
    for (std::size_t i = 0; i < occlusion_.size(); ++i) {
      if (w[i] == 0.0) continue;
      for (std::size_t e = 0; e < n; ++e) residual[e] += w[i] * occlusion_[i][e];
    }
    double loss = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
      residual[e] -= prepared_.target.data()[e];
      loss += residual[e] * residual[e];
    }
    loss /= double(n);
    std::vector<double> dw(occlusion_.size());
    double mean_dw = 0.0;
    for (std::size_t i = 0; i < occlusion_.size(); ++i) {
      double s = 0.0;
      for (std::size_t e = 0; e < n; ++e) s += residual[e] * occlusion_[i][e];
      dw[i] = 2.0 * s / double(n);
      mean_dw += w[i] * dw[i];
    }
    grad.resize(occlusion_.size());
    for (std::size_t k = 0; k < occlusion_.size(); ++k) grad[k] = w[k] * (dw[k] - mean_dw);
    return loss;
  }

 private:
  HierarchyConfig cfg_;
  detail::PreparedScene prepared_;
  std::vector<basic_image<double>> warped_fgs_;
  std::vector<basic_mask<double>> warped_masks_;
  std::vector<std::vector<double>> occlusion_;
  std::vector<double> background_term_;
};

inline constexpr double kUniformityTolerance = 1e-3;

inline OptimReport recover_hierarchy(const ToyScene& scene, std::size_t steps, double lr,
                                     const HierarchyConfig& cfg = {}) {
  const HierarchyObjective objective(scene, cfg);
  std::vector<double> logits(objective.order_count(), 0.0), grad;
  OptimReport report;
  report.steps = steps;
  report.gt_order_index = scene.gt_order_index;
  report.final_warps = scene.gt_warps;
  for (std::size_t s = 0; s < steps; ++s) {
    const double loss = objective.loss_and_gradient(logits, grad);
    if (!std::isfinite(loss)) throw Divergence(s);
    report.loss_curve.push_back(loss);
    for (std::size_t k = 0; k < logits.size(); ++k) logits[k] -= lr * grad[k];
    for (double l : logits)
      if (!std::isfinite(l)) throw Divergence(s);
  }
  report.final_loss = objective.loss_and_gradient(logits, grad);
  report.final_weights = softmax_weights(logits);
  report.recovered_order_index = report.final_weights.argmax();
  const double uniform = 1.0 / double(report.final_weights.size());
  const auto w = report.final_weights.values();
  const bool flat = std::all_of(w.begin(), w.end(), [&](double v) { return std::abs(v - uniform) < kUniformityTolerance; });
  report.order_identifiable = w.size() == 1 || !flat;
  return report;
}

// Photometric MSE as a function of per-foreground translations
// [tx_0, ty_0, tx_1, ty_1, ...] with the hierarchy frozen at ground truth.
class WarpObjective {
 public:
  explicit WarpObjective(const ToyScene& scene, const HierarchyConfig& cfg = {})
      : cfg_(cfg),
        prepared_(detail::prepare(scene, cfg)),
        weights_(HierarchyWeights::one_hot(scene.spec.foregrounds.size(), scene.gt_order_index)) {}

  double operator()(std::span<const double> translations) const {
    const auto warps = detail::translation_warps(translations);
    const auto c = detail::compose_prepared(prepared_, warps, weights_, cfg_);
    return detail::mse(c.data(), prepared_.target.data());
  }

 private:
  HierarchyConfig cfg_;
  detail::PreparedScene prepared_;
  HierarchyWeights weights_;
};

inline constexpr double kWarpGradientStep = 1e-3;

inline double translation_error(std::span<const double> t, std::span<const double> gt) {
  double worst = 0.0;
  for (std::size_t j = 0; j + 1 < t.size(); j += 2) worst = std::max(worst, std::hypot(t[j] - gt[j], t[j + 1] - gt[j + 1]));
  return worst;
}

inline OptimReport recover_warp(const ToyScene& scene, std::size_t steps, double lr, const HierarchyConfig& cfg = {}) {
  const WarpObjective objective(scene, cfg);
  const auto gt = detail::gt_translations(scene);
  std::vector<double> t(gt.size(), 0.0);
  const auto f = [&](std::span<const double> p) { return objective(p); };
  OptimReport report;
  report.steps = steps;
  report.gt_order_index = scene.gt_order_index;
  report.recovered_order_index = scene.gt_order_index;
  report.final_weights = HierarchyWeights::one_hot(scene.spec.foregrounds.size(), scene.gt_order_index);
  for (std::size_t s = 0; s < steps; ++s) {
    const double loss = objective(t);
    if (!std::isfinite(loss)) throw Divergence(s);
    report.loss_curve.push_back(loss);
    std::vector<double> grad;
    try {
      grad = numeric_gradient(f, t, kWarpGradientStep);
    } catch (const NonFiniteValue&) {
      throw Divergence(s);
    }
    for (std::size_t k = 0; k < t.size(); ++k) t[k] -= lr * grad[k];
  }
  report.final_loss = objective(t);
  report.final_warps = detail::translation_warps(t);
  report.warp_error = translation_error(t, gt);
  return report;
}

struct GradientCheck {
  std::vector<double> logits;
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_relative_discrepancy = 0.0;  // max |a - n| / max(|a|_inf, |n|_inf)
};

inline constexpr double kLogitGradientStep = 1e-3;

// Analytic logit gradient against central differences of the full pipeline,
// at seeded random logits.
inline GradientCheck check_logit_gradient(const ToyScene& scene, std::uint64_t logit_seed,
                                          const HierarchyConfig& cfg = {}) {
  const HierarchyObjective objective(scene, cfg);
  GradientCheck out;
  std::mt19937_64 rng(logit_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < objective.order_count(); ++i) out.logits.push_back(normal(rng));
  objective.loss_and_gradient(out.logits, out.analytic);
  out.numeric = numeric_gradient([&](std::span<const double> l) { return objective.loss(l); }, out.logits,
                                 kLogitGradientStep);
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < out.analytic.size(); ++i) {
    diff = std::max(diff, std::abs(out.analytic[i] - out.numeric[i]));
    scale = std::max({scale, std::abs(out.analytic[i]), std::abs(out.numeric[i])});
  }
  out.max_relative_discrepancy = scale > 0.0 ? diff / scale : diff;
  return out;
}

// Stand-in for a translated appearance: per-channel gain/offset of a blurred copy.
inline Image appearance_input(const Image& composite) {
  constexpr std::array<double, 3> gain{0.8, 0.9, 1.1};
  constexpr std::array<double, 3> offset{0.1, 0.05, -0.05};
  Image out(composite.height(), composite.width(), composite.channels());
  for (int c = 0; c < composite.channels(); ++c) {
    const auto blurred = box_mean(channel_plane(composite, c), 2);
    Plane<double> p(composite.height(), composite.width());
    for (std::size_t k = 0; k < p.data.size(); ++k) p.data[k] = gain[c % 3] * blurred.data[k] + offset[c % 3];
    set_channel_clamped(out, c, p);
  }
  return out;
}

struct SweepRow {
  double eps = 0.0;
  double output_variance = 0.0;  // over all pre-clamp output elements
};

inline std::vector<SweepRow> filter_sweep(const Image& guide, const Image& input, int radius,
                                          std::span<const double> eps_values) {
  std::vector<SweepRow> rows;
  for (double eps : eps_values) {
    const auto planes = guided_filter_unclamped(guide, input, FilterConfig{radius, eps});
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& p : planes) {
      for (double v : p.data) {
        sum += v;
        sq += v * v;
        n += 1.0;
      }
    }
    const double mean = sum / n;
    rows.push_back({eps, sq / n - mean * mean});
  }
  return rows;
}

inline nlohmann::json report_to_json(const OptimReport& r) {
  nlohmann::json warps = nlohmann::json::array();
  for (const auto& w : r.final_warps) warps.push_back(warp_to_json(w));
  const auto w = r.final_weights.values();
  return {{"steps", r.steps},
          {"loss_curve", r.loss_curve},
          {"final_loss", r.final_loss},
          {"final_weights", std::vector<double>(w.begin(), w.end())},
          {"final_warps", warps},
          {"recovered_order_index", r.recovered_order_index},
          {"gt_order_index", r.gt_order_index},
          {"order_identifiable", r.order_identifiable},
          {"warp_error", r.warp_error}};
}

}  // namespace hicomp
