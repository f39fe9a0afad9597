#pragma once

// Wasserstein adversarial objectives and the attention-weighted cycle loss.
// Expectations are arithmetic means over the supplied batch.

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hicomp/error.hpp"
#include "hicomp/image.hpp"

namespace hicomp {

struct CriticScores {
  std::vector<double> fake;
  std::vector<double> real;
};

enum class Reduction { Mean, Sum };

struct CycleConfig {
  double fg_weight = 10.0;     // extra weight on the masked foreground region, >= 1
  double cycle_lambda = 10.0;  // weight of the cycle term against the adversarial term
  Reduction reduction = Reduction::Mean;

  void validate() const {
    if (!(fg_weight >= 1.0) || !std::isfinite(fg_weight)) throw InvalidArgument("fg_weight must be >= 1");
    if (!(cycle_lambda >= 0.0) || !std::isfinite(cycle_lambda)) throw InvalidArgument("cycle_lambda must be >= 0");
  }
};

// H x W x C stack of unconstrained values, e.g. an image concatenated with its mask.
struct RasterStack {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  RasterStack() = default;
  RasterStack(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(std::size_t(h) * w * c, fill) {}

  double& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
  double at(int y, int x, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }
};

// (image, mask) as one stack with the mask as the last channel.
template <typename T>
RasterStack stack_with_mask(const basic_image<T>& img, const basic_mask<T>& mask) {
  if (img.height() != mask.height() || img.width() != mask.width()) {
    throw DimensionMismatch("stack_with_mask: image and mask sizes differ");
  }
  RasterStack s(img.height(), img.width(), img.channels() + 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) s.at(y, x, c) = double(img.at(y, x, c));
      s.at(y, x, img.channels()) = double(mask.at(y, x));
    }
  }
  return s;
}

namespace detail {

inline double checked_mean(std::span<const double> v, const char* what) {
  if (v.empty()) throw InvalidArgument(std::string(what) + ": empty score vector");
  double sum = 0.0;
  for (double s : v) {
    if (!std::isfinite(s)) throw NonFiniteValue(std::string(what) + ": non-finite score");
    sum += s;
  }
  return sum / double(v.size());
}

}  // namespace detail

// mean(fake) - mean(real)
inline double wgan_critic_loss(const CriticScores& s) {
  return detail::checked_mean(s.fake, "wgan_critic_loss") - detail::checked_mean(s.real, "wgan_critic_loss");
}

// -mean(fake)
inline double wgan_generator_loss(std::span<const double> fake_scores) {
  return -detail::checked_mean(fake_scores, "wgan_generator_loss");
}

// fg_weight * reduce(|d| * m) + reduce(|d| * (1 - m)), d = recovered - original,
// mask broadcast over channels.
template <typename T>
double attentional_cycle_loss(const RasterStack& recovered, const RasterStack& original, const basic_mask<T>& mask,
                              const CycleConfig& cfg = {}) {
  cfg.validate();
  if (recovered.height != original.height || recovered.width != original.width ||
      recovered.channels != original.channels) {
    throw DimensionMismatch("attentional_cycle_loss: recovered and original differ in shape");
  }
  if (mask.height() != recovered.height || mask.width() != recovered.width) {
    throw DimensionMismatch("attentional_cycle_loss: mask size does not match the stacks");
  }
  double fg = 0.0, bg = 0.0;
  const int c = recovered.channels;
  for (std::size_t px = 0; px < mask.pixel_count(); ++px) {
    const double m = double(mask.data()[px]);
    for (int k = 0; k < c; ++k) {
      const double d = std::abs(recovered.data[px * c + k] - original.data[px * c + k]);
      fg += d * m;
      bg += d * (1.0 - m);
    }
  }
  if (cfg.reduction == Reduction::Mean) {
    const double n = double(recovered.data.size());
    fg /= n;
    bg /= n;
  }
  return cfg.fg_weight * fg + bg;
}

// Generator side of the appearance mapping: adversarial term plus weighted cycle term.
inline double appearance_generator_objective(std::span<const double> fake_scores, double cycle_loss,
                                             const CycleConfig& cfg = {}) {
  cfg.validate();
  return wgan_generator_loss(fake_scores) + cfg.cycle_lambda * cycle_loss;
}

}  // namespace hicomp
