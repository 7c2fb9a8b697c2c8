#pragma once

// Tiny RGB raster with rectangle, line, dot and 5x7 bitmap-text primitives.
// Enough to draw deterministic report figures without a plotting dependency.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string_view>
#include <utility>

#include "fauseg/png_io.hpp"

namespace fauseg {

namespace detail {

struct Glyph {
  char ch;
  std::array<std::uint8_t, 7> rows;  // low 5 bits, MSB = leftmost column
};

// clang-format off
inline constexpr std::array<Glyph, 51> kFont{{
  {'A', {0x0E,0x11,0x11,0x1F,0x11,0x11,0x11}}, {'B', {0x1E,0x11,0x11,0x1E,0x11,0x11,0x1E}},
  {'C', {0x0E,0x11,0x10,0x10,0x10,0x11,0x0E}}, {'D', {0x1E,0x11,0x11,0x11,0x11,0x11,0x1E}},
  {'E', {0x1F,0x10,0x10,0x1E,0x10,0x10,0x1F}}, {'F', {0x1F,0x10,0x10,0x1E,0x10,0x10,0x10}},
  {'G', {0x0E,0x11,0x10,0x17,0x11,0x11,0x0F}}, {'H', {0x11,0x11,0x11,0x1F,0x11,0x11,0x11}},
  {'I', {0x0E,0x04,0x04,0x04,0x04,0x04,0x0E}}, {'J', {0x07,0x02,0x02,0x02,0x02,0x12,0x0C}},
  {'K', {0x11,0x12,0x14,0x18,0x14,0x12,0x11}}, {'L', {0x10,0x10,0x10,0x10,0x10,0x10,0x1F}},
  {'M', {0x11,0x1B,0x15,0x15,0x11,0x11,0x11}}, {'N', {0x11,0x11,0x19,0x15,0x13,0x11,0x11}},
  {'O', {0x0E,0x11,0x11,0x11,0x11,0x11,0x0E}}, {'P', {0x1E,0x11,0x11,0x1E,0x10,0x10,0x10}},
  {'Q', {0x0E,0x11,0x11,0x11,0x15,0x12,0x0D}}, {'R', {0x1E,0x11,0x11,0x1E,0x14,0x12,0x11}},
  {'S', {0x0F,0x10,0x10,0x0E,0x01,0x01,0x1E}}, {'T', {0x1F,0x04,0x04,0x04,0x04,0x04,0x04}},
  {'U', {0x11,0x11,0x11,0x11,0x11,0x11,0x0E}}, {'V', {0x11,0x11,0x11,0x11,0x11,0x0A,0x04}},
  {'W', {0x11,0x11,0x11,0x15,0x15,0x15,0x0A}}, {'X', {0x11,0x11,0x0A,0x04,0x0A,0x11,0x11}},
  {'Y', {0x11,0x11,0x11,0x0A,0x04,0x04,0x04}}, {'Z', {0x1F,0x01,0x02,0x04,0x08,0x10,0x1F}},
  {'0', {0x0E,0x11,0x13,0x15,0x19,0x11,0x0E}}, {'1', {0x04,0x0C,0x04,0x04,0x04,0x04,0x0E}},
  {'2', {0x0E,0x11,0x01,0x02,0x04,0x08,0x1F}}, {'3', {0x1F,0x02,0x04,0x02,0x01,0x11,0x0E}},
  {'4', {0x02,0x06,0x0A,0x12,0x1F,0x02,0x02}}, {'5', {0x1F,0x10,0x1E,0x01,0x01,0x11,0x0E}},
  {'6', {0x06,0x08,0x10,0x1E,0x11,0x11,0x0E}}, {'7', {0x1F,0x01,0x02,0x04,0x08,0x08,0x08}},
  {'8', {0x0E,0x11,0x11,0x0E,0x11,0x11,0x0E}}, {'9', {0x0E,0x11,0x11,0x0F,0x01,0x02,0x0C}},
  {' ', {0x00,0x00,0x00,0x00,0x00,0x00,0x00}}, {'-', {0x00,0x00,0x00,0x1F,0x00,0x00,0x00}},
  {'.', {0x00,0x00,0x00,0x00,0x00,0x0C,0x0C}}, {'_', {0x00,0x00,0x00,0x00,0x00,0x00,0x1F}},
  {'%', {0x18,0x19,0x02,0x04,0x08,0x13,0x03}}, {'(', {0x02,0x04,0x08,0x08,0x08,0x04,0x02}},
  {')', {0x08,0x04,0x02,0x02,0x02,0x04,0x08}}, {':', {0x00,0x0C,0x0C,0x00,0x0C,0x0C,0x00}},
  {'/', {0x00,0x01,0x02,0x04,0x08,0x10,0x00}}, {'+', {0x00,0x04,0x04,0x1F,0x04,0x04,0x00}},
  {'=', {0x00,0x00,0x1F,0x00,0x1F,0x00,0x00}}, {',', {0x00,0x00,0x00,0x00,0x0C,0x04,0x08}},
  {'<', {0x02,0x04,0x08,0x10,0x08,0x04,0x02}}, {'>', {0x08,0x04,0x02,0x01,0x02,0x04,0x08}},
  {'?', {0x0E,0x11,0x01,0x02,0x04,0x00,0x04}},
}};
// clang-format on

inline const Glyph& glyph(char c) {
  const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont) {
    if (g.ch == upper) return g;
  }
  return kFont.back();  // '?'
}

}  // namespace detail

class Canvas {
 public:
  Canvas(int width, int height, png::Rgb background = {255, 255, 255})
      : raster_{width, height, png::PixelFormat::Rgb,
                std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3), {}} {
    fill_rect(0, 0, width, height, background);
  }

  [[nodiscard]] int width() const noexcept { return raster_.width; }
  [[nodiscard]] int height() const noexcept { return raster_.height; }
  [[nodiscard]] const png::Raster& raster() const noexcept { return raster_; }

  void set(int x, int y, png::Rgb c) {
    if (x < 0 || y < 0 || x >= raster_.width || y >= raster_.height) return;
    auto* p = raster_.pixels.data() + (static_cast<std::size_t>(y) * raster_.width + x) * 3;
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  [[nodiscard]] png::Rgb get(int x, int y) const {
    const auto* p = raster_.pixels.data() + (static_cast<std::size_t>(y) * raster_.width + x) * 3;
    return {p[0], p[1], p[2]};
  }

  /// Half-open rectangle [x0, x1) x [y0, y1).
  void fill_rect(int x0, int y0, int x1, int y1, png::Rgb c) {
    for (int y = std::max(0, y0); y < std::min(raster_.height, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(raster_.width, x1); ++x) set(x, y, c);
  }

  void outline_rect(int x0, int y0, int x1, int y1, png::Rgb c, int thickness = 1) {
    fill_rect(x0, y0, x1, y0 + thickness, c);
    fill_rect(x0, y1 - thickness, x1, y1, c);
    fill_rect(x0, y0, x0 + thickness, y1, c);
    fill_rect(x1 - thickness, y0, x1, y1, c);
  }

  void hline(int x0, int x1, int y, png::Rgb c, int thickness = 1) {
    fill_rect(std::min(x0, x1), y, std::max(x0, x1) + 1, y + thickness, c);
  }
  void vline(int x, int y0, int y1, png::Rgb c, int thickness = 1) {
    fill_rect(x, std::min(y0, y1), x + thickness, std::max(y0, y1) + 1, c);
  }

  void dot(int cx, int cy, int radius, png::Rgb c) {
    for (int y = -radius; y <= radius; ++y)
      for (int x = -radius; x <= radius; ++x)
        if (x * x + y * y <= radius * radius) set(cx + x, cy + y, c);
  }

  /// Draws text with its top-left corner at (x, y); returns the advance width.
  int text(int x, int y, std::string_view s, png::Rgb c, int scale = 1) {
    int cursor = x;
    for (const char ch : s) {
      const auto& g = detail::glyph(ch);
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (g.rows[static_cast<std::size_t>(row)] & (0x10 >> col))
            fill_rect(cursor + col * scale, y + row * scale, cursor + (col + 1) * scale, y + (row + 1) * scale, c);
      cursor += 6 * scale;
    }
    return cursor - x;
  }

  static int text_width(std::string_view s, int scale = 1) { return static_cast<int>(s.size()) * 6 * scale; }

  void blit(int x0, int y0, const Canvas& src) {
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) set(x0 + x, y0 + y, src.get(x, y));
  }

  void save(const std::filesystem::path& path) const { png::write(path, raster_); }

 private:
  png::Raster raster_;
};

}  // namespace fauseg
