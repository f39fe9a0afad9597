#pragma once

// 8-bit grayscale / RGB PNG boundary. Samples map v -> v/255 on decode and
// f -> round_half_up(f*255) clamped to [0,255] on encode.

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hicomp/error.hpp"
#include "hicomp/image.hpp"

namespace hicomp {

namespace detail {

struct PngReadContext {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  char message[256] = {};
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
};

struct PngWriteContext {
  std::vector<std::uint8_t> out;
  char message[256] = {};
};

extern "C" inline void png_read_from_span(png_structp png, png_bytep dst, png_size_t len) {
  auto* ctx = static_cast<PngReadContext*>(png_get_io_ptr(png));
  if (len > ctx->bytes.size() - ctx->pos) png_error(png, "unexpected end of stream");
  std::memcpy(dst, ctx->bytes.data() + ctx->pos, len);
  ctx->pos += len;
}

extern "C" inline void png_read_error(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngReadContext*>(png_get_error_ptr(png));
  std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
  png_longjmp(png, 1);
}

extern "C" inline void png_write_to_vector(png_structp png, png_bytep src, png_size_t len) {
  auto* ctx = static_cast<PngWriteContext*>(png_get_io_ptr(png));
  ctx->out.insert(ctx->out.end(), src, src + len);
}

extern "C" inline void png_write_error(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngWriteContext*>(png_get_error_ptr(png));
  std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
  png_longjmp(png, 1);
}

extern "C" inline void png_flush_noop(png_structp) {}
extern "C" inline void png_warning_ignore(png_structp, png_const_charp) {}

inline std::uint8_t quantize(double f) {
  if (!(f > 0.0)) return 0;  // also maps NaN to 0
  const double scaled = std::floor(f * 255.0 + 0.5);
  return scaled >= 255.0 ? 255 : static_cast<std::uint8_t>(scaled);
}

// Decodes into raw 8-bit samples; returns the context holding them.
inline std::unique_ptr<PngReadContext> decode_png_samples(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kSig = 8;
  if (bytes.size() < kSig) throw DecodeError("stream shorter than the PNG signature", bytes.size());
  for (std::size_t i = 0; i < kSig; ++i) {
    if (png_sig_cmp(bytes.data(), i, 1) != 0) throw DecodeError("bad PNG signature", i);
  }

  auto ctx = std::make_unique<PngReadContext>();
  ctx->bytes = bytes;
  PngReadContext* const c = ctx.get();

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, c, png_read_error, png_warning_ignore);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }

  // Nothing with a destructor may be created between here and the last libpng call.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError(c->message, c->pos);
  }

  png_set_read_fn(png, c, png_read_from_span);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  const bool supported =
      bit_depth == 8 && (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_RGB);
  if (!supported) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnsupportedFormat("unsupported PNG: bit depth " + std::to_string(bit_depth) + ", color type " +
                            std::to_string(color_type) + " (only 8-bit gray or RGB)");
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  c->width = static_cast<int>(png_get_image_width(png, info));
  c->height = static_cast<int>(png_get_image_height(png, info));
  c->channels = color_type == PNG_COLOR_TYPE_GRAY ? 1 : 3;
  const std::size_t stride = std::size_t(c->width) * c->channels;
  c->pixels.resize(stride * c->height);
  c->rows.resize(c->height);
  for (int y = 0; y < c->height; ++y) c->rows[y] = c->pixels.data() + stride * y;

  png_read_image(png, c->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return ctx;
}

inline std::vector<std::uint8_t> encode_png_samples(int height, int width, int channels,
                                                    std::span<const std::uint8_t> samples) {
  auto ctx = std::make_unique<PngWriteContext>();
  PngWriteContext* const c = ctx.get();
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, c, png_write_error, png_warning_ignore);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(height);
  const std::size_t stride = std::size_t(width) * channels;
  for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(samples.data() + stride * y);
  png_bytepp row_ptrs = rows.data();

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(std::string("PNG encode failed: ") + c->message);
  }
  png_set_write_fn(png, c, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(c->out);
}

}  // namespace detail

inline Image decode_image(std::span<const std::uint8_t> bytes) {
  auto ctx = detail::decode_png_samples(bytes);
  std::vector<float> data(ctx->pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(double(ctx->pixels[i]) / 255.0);
  return Image(ctx->height, ctx->width, ctx->channels, std::move(data));
}

// Masks travel as 8-bit gray PNGs.
inline MaskMap decode_mask(std::span<const std::uint8_t> bytes) {
  auto ctx = detail::decode_png_samples(bytes);
  if (ctx->channels != 1) throw UnsupportedFormat("mask PNG must be 8-bit grayscale");
  std::vector<float> data(ctx->pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(double(ctx->pixels[i]) / 255.0);
  return MaskMap(ctx->height, ctx->width, std::move(data));
}

template <typename T>
std::vector<std::uint8_t> encode_image(const basic_image<T>& img) {
  std::vector<std::uint8_t> samples(img.size());
  auto src = img.data();
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = detail::quantize(double(src[i]));
  return detail::encode_png_samples(img.height(), img.width(), img.channels(), samples);
}

template <typename T>
std::vector<std::uint8_t> encode_mask(const basic_mask<T>& m) {
  std::vector<std::uint8_t> samples(m.size());
  auto src = m.data();
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = detail::quantize(double(src[i]));
  return detail::encode_png_samples(m.height(), m.width(), 1, samples);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline Image load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }
inline MaskMap load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

template <typename T>
void save_image(const std::filesystem::path& path, const basic_image<T>& img) {
  write_file(path, encode_image(img));
}

template <typename T>
void save_mask(const std::filesystem::path& path, const basic_mask<T>& m) {
  write_file(path, encode_mask(m));
}

}  // namespace hicomp
