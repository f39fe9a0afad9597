#pragma once

// Raster containers shared by every module.
//
// All rasters are row-major with a top-left origin. Pixel values of images
// and masks live in [0,1]; Plane is the unconstrained single-channel work
// buffer used for intermediate statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hicomp/error.hpp"

namespace hicomp {

namespace detail {

template <typename T>
void check_unit_range(std::span<const T> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T v = values[i];
    if (!std::isfinite(v)) {
      throw NonFiniteValue(std::string(what) + ": non-finite value at element " + std::to_string(i));
    }
    if (v < T(0) || v > T(1)) {
      throw InvalidArgument(std::string(what) + ": value " + std::to_string(v) + " at element " +
                            std::to_string(i) + " outside [0,1]");
    }
  }
}

template <typename T>
constexpr T clamp01(T v) {
  return v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
}

}  // namespace detail

// H x W x C raster, interleaved channels.
template <typename T>
class basic_image {
 public:
  using value_type = T;

  basic_image() = default;

  basic_image(int height, int width, int channels, T fill = T(0))
      : height_(height), width_(width), channels_(channels) {
    check_shape();
    data_.assign(std::size_t(height) * width * channels, fill);
    detail::check_unit_range<T>(std::span<const T>(&fill, 1), "image fill");
  }

  basic_image(int height, int width, int channels, std::vector<T> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_shape();
    if (data_.size() != std::size_t(height) * width * channels) {
      throw DimensionMismatch("image data length " + std::to_string(data_.size()) + " does not match " +
                              std::to_string(height) + "x" + std::to_string(width) + "x" +
                              std::to_string(channels));
    }
    detail::check_unit_range<T>(data_, "image");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return std::size_t(height_) * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool same_shape(const basic_image& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  // Re-checks the value invariant after direct writes through at()/data().
  void validate() const { detail::check_unit_range<T>(data_, "image"); }

  template <typename U>
  basic_image<U> cast() const {
    basic_image<U> out(height_, width_, channels_);
    std::transform(data_.begin(), data_.end(), out.data().begin(), [](T v) { return U(v); });
    return out;
  }

  friend bool operator==(const basic_image&, const basic_image&) = default;

 private:
  void check_shape() const {
    if (height_ <= 0 || width_ <= 0) throw InvalidArgument("image dimensions must be positive");
    if (channels_ != 1 && channels_ != 3) {
      throw InvalidArgument("image must have 1 or 3 channels, got " + std::to_string(channels_));
    }
  }
  std::size_t index(int y, int x, int c) const noexcept {
    return (std::size_t(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

// H x W soft mask in [0,1]; binary masks are the {0,1} special case.
template <typename T>
class basic_mask {
 public:
  using value_type = T;

  basic_mask() = default;

  basic_mask(int height, int width, T fill = T(0)) : height_(height), width_(width) {
    if (height <= 0 || width <= 0) throw InvalidArgument("mask dimensions must be positive");
    detail::check_unit_range<T>(std::span<const T>(&fill, 1), "mask fill");
    data_.assign(std::size_t(height) * width, fill);
  }

  basic_mask(int height, int width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (height <= 0 || width <= 0) throw InvalidArgument("mask dimensions must be positive");
    if (data_.size() != std::size_t(height) * width) {
      throw DimensionMismatch("mask data length " + std::to_string(data_.size()) + " does not match " +
                              std::to_string(height) + "x" + std::to_string(width));
    }
    detail::check_unit_range<T>(data_, "mask");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  static constexpr int channels() noexcept { return 1; }
  std::size_t pixel_count() const noexcept { return data_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(int y, int x) { return data_[std::size_t(y) * width_ + x]; }
  const T& at(int y, int x) const { return data_[std::size_t(y) * width_ + x]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool is_binary() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return v == T(0) || v == T(1); });
  }

  void validate() const { detail::check_unit_range<T>(data_, "mask"); }

  template <typename U>
  basic_mask<U> cast() const {
    basic_mask<U> out(height_, width_);
    std::transform(data_.begin(), data_.end(), out.data().begin(), [](T v) { return U(v); });
    return out;
  }

  friend bool operator==(const basic_mask&, const basic_mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

// Unconstrained single-channel buffer for filter statistics.
template <typename T>
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(int h, int w, T fill = T(0)) : height(h), width(w), data(std::size_t(h) * w, fill) {}

  T& at(int y, int x) { return data[std::size_t(y) * width + x]; }
  const T& at(int y, int x) const { return data[std::size_t(y) * width + x]; }
};

using Image = basic_image<float>;
using MaskMap = basic_mask<float>;

template <typename T>
Plane<T> channel_plane(const basic_image<T>& img, int c) {
  Plane<T> p(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) p.at(y, x) = img.at(y, x, c);
  return p;
}

template <typename T>
Plane<T> mask_plane(const basic_mask<T>& m) {
  Plane<T> p(m.height(), m.width());
  std::copy(m.data().begin(), m.data().end(), p.data.begin());
  return p;
}

// Copies `p` into channel c of `img`, clamping to [0,1].
template <typename T, typename U>
void set_channel_clamped(basic_image<T>& img, int c, const Plane<U>& p) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.at(y, x, c) = T(detail::clamp01(p.at(y, x)));
}

}  // namespace hicomp
