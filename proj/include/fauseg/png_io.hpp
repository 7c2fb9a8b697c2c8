#pragma once

// Minimal 8-bit PNG reading and writing on top of libpng. Writing is
// deterministic: no time or text chunks are emitted.

#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fauseg/errors.hpp"

namespace fauseg::png {

struct Rgb {
  std::uint8_t r, g, b;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

enum class PixelFormat { Gray, Palette, Rgb };

/// 8 bits per sample; `channels` is 1 for gray/palette, 3 for RGB.
struct Raster {
  int width = 0;
  int height = 0;
  PixelFormat format = PixelFormat::Gray;
  std::vector<std::uint8_t> pixels;
  std::vector<Rgb> palette;

  [[nodiscard]] int channels() const noexcept { return format == PixelFormat::Rgb ? 3 : 1; }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void silent_warning(png_structp, png_const_charp) {}

}  // namespace detail

inline void write(const std::filesystem::path& path, const Raster& raster) {
  const auto expected = static_cast<std::size_t>(raster.width) * raster.height * raster.channels();
  if (raster.width <= 0 || raster.height <= 0 || raster.pixels.size() != expected) {
    throw DataError("png write " + path.string() + ": raster size does not match its dimensions");
  }
  if (raster.format == PixelFormat::Palette && (raster.palette.empty() || raster.palette.size() > 256)) {
    throw DataError("png write " + path.string() + ": palette must hold 1..256 entries");
  }
  detail::FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw DataError("cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, detail::silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed for " + path.string());
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(raster.height));
  std::vector<png_color> colors(raster.palette.size());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng failed while writing " + path.string());
  }
  png_init_io(png, file.get());
  const int color_type = raster.format == PixelFormat::Gray      ? PNG_COLOR_TYPE_GRAY
                         : raster.format == PixelFormat::Palette ? PNG_COLOR_TYPE_PALETTE
                                                                 : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (raster.format == PixelFormat::Palette) {
    for (std::size_t i = 0; i < raster.palette.size(); ++i) {
      colors[i] = {raster.palette[i].r, raster.palette[i].g, raster.palette[i].b};
    }
    png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
  }
  png_write_info(png, info);
  const auto stride = static_cast<std::size_t>(raster.width) * raster.channels();
  for (std::size_t y = 0; y < rows.size(); ++y) {
    rows[y] = const_cast<png_bytep>(raster.pixels.data() + y * stride);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads an 8-bit gray, paletted (indices preserved) or RGB PNG.
inline Raster read(const std::filesystem::path& path) {
  detail::FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path.string());
  std::array<unsigned char, 8> signature{};
  if (std::fread(signature.data(), 1, signature.size(), file.get()) != signature.size() ||
      png_sig_cmp(signature.data(), 0, signature.size()) != 0) {
    throw DataError(path.string() + " is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, detail::silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed for " + path.string());
  }
  Raster raster;
  std::vector<png_bytep> rows;
  std::string problem;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, static_cast<int>(signature.size()));
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const auto depth = png_get_bit_depth(png, info);
  const auto color_type = png_get_color_type(png, info);
  if (depth != 8 || png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    problem = "only 8-bit non-interlaced PNGs are supported";
  } else if (color_type == PNG_COLOR_TYPE_GRAY) {
    raster.format = PixelFormat::Gray;
  } else if (color_type == PNG_COLOR_TYPE_PALETTE) {
    raster.format = PixelFormat::Palette;
    png_colorp colors = nullptr;
    int count = 0;
    if (png_get_PLTE(png, info, &colors, &count) != 0) {
      for (int i = 0; i < count; ++i) raster.palette.push_back({colors[i].red, colors[i].green, colors[i].blue});
    }
  } else if (color_type == PNG_COLOR_TYPE_RGB) {
    raster.format = PixelFormat::Rgb;
  } else {
    problem = "unsupported PNG color type " + std::to_string(color_type);
  }
  if (problem.empty()) {
    raster.width = static_cast<int>(width);
    raster.height = static_cast<int>(height);
    const auto stride = static_cast<std::size_t>(width) * raster.channels();
    raster.pixels.resize(stride * height);
    rows.resize(height);
    for (std::size_t y = 0; y < height; ++y) rows[y] = raster.pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!problem.empty()) throw DataError(path.string() + ": " + problem);
  return raster;
}

}  // namespace fauseg::png
