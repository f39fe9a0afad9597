#pragma once

// Hierarchy composition over all M! occlusion orders.
//
// Soft set algebra is used throughout: intersection is the product,
// complement is 1 - m and union is 1 - prod(1 - m). On binary masks this is
// exactly the boolean composition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hicomp/error.hpp"
#include "hicomp/image.hpp"

namespace hicomp {

struct HierarchyConfig {
  // M! orders are enumerated per pixel, so this bounds both memory and time.
  std::size_t max_foregrounds = 6;
};

inline constexpr double kSimplexTolerance = 1e-6;

// Foreground indices by decreasing occlusion priority.
struct OcclusionOrder {
  std::vector<int> priority;

  std::size_t size() const noexcept { return priority.size(); }
  friend bool operator==(const OcclusionOrder&, const OcclusionOrder&) = default;
};

inline std::size_t factorial(std::size_t m) {
  std::size_t f = 1;
  for (std::size_t k = 2; k <= m; ++k) f *= k;
  return f;
}

inline void check_foreground_count(std::size_t m, const HierarchyConfig& cfg = {}) {
  if (m < 1) throw InvalidArgument("at least one foreground is required");
  if (m > cfg.max_foregrounds) throw FactorialBlowup(m, cfg.max_foregrounds);
}

// All M! orders in lexicographic sequence.
inline std::vector<OcclusionOrder> enumerate_orders(std::size_t m, const HierarchyConfig& cfg = {}) {
  check_foreground_count(m, cfg);
  std::vector<OcclusionOrder> orders;
  orders.reserve(factorial(m));
  std::vector<int> p(m);
  std::iota(p.begin(), p.end(), 0);
  do {
    orders.push_back({p});
  } while (std::next_permutation(p.begin(), p.end()));
  return orders;
}

// Lexicographic rank of `order` among the permutations of its size.
inline std::size_t order_index(const OcclusionOrder& order) {
  const std::size_t m = order.size();
  std::vector<bool> used(m, false);
  std::size_t rank = 0;
  for (std::size_t pos = 0; pos < m; ++pos) {
    const int v = order.priority[pos];
    if (v < 0 || std::size_t(v) >= m || used[v]) throw InvalidArgument("occlusion order is not a permutation");
    std::size_t smaller = 0;
    for (int u = 0; u < v; ++u) smaller += used[u] ? 0 : 1;
    rank += smaller * factorial(m - 1 - pos);
    used[v] = true;
  }
  return rank;
}

// Nonnegative weights over the M! orders summing to 1.
class HierarchyWeights {
 public:
  HierarchyWeights() = default;

  explicit HierarchyWeights(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw InvalidWeights("hierarchy weights are empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      if (!std::isfinite(w_[i]) || w_[i] < 0.0) {
        throw InvalidWeights("hierarchy weight " + std::to_string(i) + " is negative or non-finite");
      }
      sum += w_[i];
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      throw InvalidWeights("hierarchy weights sum to " + std::to_string(sum) + ", not 1");
    }
    std::size_t m = 0;
    while (factorial(m) < w_.size()) ++m;
    if (factorial(m) != w_.size()) {
      throw InvalidWeights("hierarchy weight count " + std::to_string(w_.size()) + " is not a factorial");
    }
  }

  static HierarchyWeights uniform(std::size_t m) {
    const std::size_t n = factorial(m);
    return HierarchyWeights(std::vector<double>(n, 1.0 / double(n)));
  }

  static HierarchyWeights one_hot(std::size_t m, std::size_t index) {
    std::vector<double> w(factorial(m), 0.0);
    if (index >= w.size()) throw InvalidWeights("one-hot index out of range");
    w[index] = 1.0;
    return HierarchyWeights(std::move(w));
  }

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const noexcept { return w_; }

  std::size_t argmax() const {
    return std::size_t(std::max_element(w_.begin(), w_.end()) - w_.begin());
  }

 private:
  std::vector<double> w_;
};

// Max-shifted softmax.
inline HierarchyWeights softmax_weights(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("softmax_weights: empty logits");
  for (double l : logits)
    if (!std::isfinite(l)) throw NonFiniteValue("softmax_weights: non-finite logit");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += (w[i] = std::exp(logits[i] - top));
  for (double& v : w) v /= sum;
  return HierarchyWeights(std::move(w));
}

// Weights re-expressed after relabelling the foregrounds: new foreground k is
// old foreground `perm[k]`.
inline HierarchyWeights permute_weights(const HierarchyWeights& w, std::span<const int> perm) {
  const auto orders = enumerate_orders(perm.size(), {perm.size()});
  if (orders.size() != w.size()) throw InvalidWeights("permute_weights: weight count does not match M!");
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < orders.size(); ++i) {
    OcclusionOrder old;
    for (int k : orders[i].priority) old.priority.push_back(perm[k]);
    out[i] = w[order_index(old)];
  }
  return HierarchyWeights(std::move(out));
}

namespace detail {

template <typename T>
void check_masks(std::span<const basic_mask<T>> masks) {
  if (masks.empty()) throw InvalidArgument("at least one mask is required");
  for (std::size_t j = 1; j < masks.size(); ++j) {
    if (masks[j].height() != masks[0].height() || masks[j].width() != masks[0].width()) {
      throw DimensionMismatch("mask " + std::to_string(j) + " is " + std::to_string(masks[j].height()) + "x" +
                              std::to_string(masks[j].width()) + ", expected " +
                              std::to_string(masks[0].height()) + "x" + std::to_string(masks[0].width()));
    }
  }
}

// Per-pixel blend coefficients: coef[j] = sum_i w_i visible_j(order_i) for
// each foreground j; the background coefficient is returned.
inline double pixel_blend(std::span<const double> m, const std::vector<OcclusionOrder>& orders,
                          std::span<const double> w, std::span<double> coef) {
  std::fill(coef.begin(), coef.end(), 0.0);
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (w[i] == 0.0) continue;
    double uncovered = 1.0;
    for (int j : orders[i].priority) {
      coef[j] += w[i] * m[j] * uncovered;
      uncovered *= 1.0 - m[j];
    }
  }
  double bg = 1.0;
  for (double v : m) bg *= 1.0 - v;
  return bg;
}

}  // namespace detail

// visible[j] = m_j * prod over higher-priority k of (1 - m_k), indexed by foreground.
template <typename T>
std::vector<basic_mask<T>> visible_masks(std::span<const basic_mask<T>> masks, const OcclusionOrder& order) {
  detail::check_masks(masks);
  if (order.size() != masks.size()) throw InvalidArgument("occlusion order length does not match mask count");
  (void)order_index(order);  // validates the permutation
  const int h = masks[0].height(), w = masks[0].width();
  std::vector<basic_mask<T>> out(masks.size(), basic_mask<T>(h, w));
  for (std::size_t px = 0; px < masks[0].pixel_count(); ++px) {
    double uncovered = 1.0;
    for (int j : order.priority) {
      const double m = double(masks[j].data()[px]);
      out[j].data()[px] = T(detail::clamp01(m * uncovered));
      uncovered *= 1.0 - m;
    }
  }
  return out;
}

template <typename T>
struct Composite {
  basic_image<T> image;
  basic_mask<T> combined_mask;
};

namespace detail {

template <typename T>
void check_composition_inputs(const basic_image<T>& bg, std::span<const basic_image<T>> fgs,
                              std::span<const basic_mask<T>> masks, std::size_t weight_count,
                              const HierarchyConfig& cfg) {
  if (fgs.size() != masks.size()) {
    throw InvalidArgument(std::to_string(fgs.size()) + " foregrounds but " + std::to_string(masks.size()) +
                          " masks");
  }
  check_foreground_count(fgs.size(), cfg);
  for (std::size_t j = 0; j < fgs.size(); ++j) {
    if (!fgs[j].same_shape(bg)) {
      throw DimensionMismatch("foreground " + std::to_string(j) + " does not match the background shape");
    }
    if (masks[j].height() != bg.height() || masks[j].width() != bg.width()) {
      throw DimensionMismatch("mask " + std::to_string(j) + " does not match the background size");
    }
  }
  const std::size_t expected = factorial(fgs.size());
  if (weight_count != expected) {
    throw InvalidWeights("expected " + std::to_string(expected) + " weights, got " + std::to_string(weight_count));
  }
}

}  // namespace detail

// Per-pixel blend coefficients: planes 0..M-1 weight the foregrounds, plane M
// weights the background.
template <typename T>
std::vector<Plane<double>> blend_coefficients(std::span<const basic_mask<T>> masks, const HierarchyWeights& w,
                                              const HierarchyConfig& cfg = {}) {
  detail::check_masks(masks);
  check_foreground_count(masks.size(), cfg);
  if (w.size() != factorial(masks.size())) {
    throw InvalidWeights("expected " + std::to_string(factorial(masks.size())) + " weights, got " +
                         std::to_string(w.size()));
  }
  const auto orders = enumerate_orders(masks.size(), cfg);
  const std::size_t m = masks.size();
  std::vector<Plane<double>> out(m + 1, Plane<double>(masks[0].height(), masks[0].width()));
  std::vector<double> mv(m), coef(m);
  for (std::size_t px = 0; px < masks[0].pixel_count(); ++px) {
    for (std::size_t j = 0; j < m; ++j) mv[j] = double(masks[j].data()[px]);
    out[m].data[px] = detail::pixel_blend(mv, orders, w.values(), coef);
    for (std::size_t j = 0; j < m; ++j) out[j].data[px] = coef[j];
  }
  return out;
}

// C = sum_i w_i O_i + BG * prod_j (1 - m_j), O_i = sum_j FG_j visible_j(order_i).
// Foregrounds and masks are expected to be already warped onto the canvas.
template <typename T>
Composite<T> compose_hierarchy(const basic_image<T>& bg, std::span<const basic_image<T>> fgs,
                               std::span<const basic_mask<T>> masks, const HierarchyWeights& w,
                               const HierarchyConfig& cfg = {}) {
  detail::check_composition_inputs(bg, fgs, masks, w.size(), cfg);
  const auto orders = enumerate_orders(fgs.size(), cfg);
  const std::size_t m = fgs.size();
  const int channels = bg.channels();
  Composite<T> out{basic_image<T>(bg.height(), bg.width(), channels), basic_mask<T>(bg.height(), bg.width())};
  std::vector<double> mv(m), coef(m);
  for (std::size_t px = 0; px < bg.pixel_count(); ++px) {
    for (std::size_t j = 0; j < m; ++j) mv[j] = double(masks[j].data()[px]);
    const double bg_coef = detail::pixel_blend(mv, orders, w.values(), coef);
    for (int c = 0; c < channels; ++c) {
      const std::size_t e = px * channels + c;
      double v = bg_coef * double(bg.data()[e]);
      for (std::size_t j = 0; j < m; ++j) v += coef[j] * double(fgs[j].data()[e]);
      out.image.data()[e] = T(detail::clamp01(v));
    }
    out.combined_mask.data()[px] = T(detail::clamp01(1.0 - bg_coef));
  }
  return out;
}

// O for a single order, without the background term.
template <typename T>
basic_image<T> occlusion_result(std::span<const basic_image<T>> fgs, std::span<const basic_mask<T>> masks,
                                const OcclusionOrder& order) {
  const auto vis = visible_masks(masks, order);
  if (fgs.size() != masks.size()) throw InvalidArgument("foreground and mask counts differ");
  const int channels = fgs[0].channels();
  basic_image<T> out(fgs[0].height(), fgs[0].width(), channels);
  for (std::size_t px = 0; px < out.pixel_count(); ++px) {
    for (int c = 0; c < channels; ++c) {
      double v = 0.0;
      for (std::size_t j = 0; j < fgs.size(); ++j) {
        v += double(vis[j].data()[px]) * double(fgs[j].data()[px * channels + c]);
      }
      out.data()[px * channels + c] = T(detail::clamp01(v));
    }
  }
  return out;
}

}  // namespace hicomp
