#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fauseg/errors.hpp"

namespace fauseg {

inline constexpr int kNumClasses = 5;

enum class Zone : std::uint8_t { Background = 0, CZ = 1, PZ = 2, TZ = 3, TUM = 4 };

inline constexpr std::array<std::string_view, kNumClasses> kZoneNames{"BG", "CZ", "PZ", "TZ", "TUM"};

/// Row-major 2-D array. Used for images (float in [0,1]) and label maps.
template <class T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(int h, int w, T fill = T{}) : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  [[nodiscard]] T& operator()(int y, int x) noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] const T& operator()(int y, int x) const noexcept {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] std::span<const T> span() const noexcept { return values; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using Image = Grid<float>;
using LabelMap = Grid<std::uint8_t>;

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, std::string_view what) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  }
}

}  // namespace fauseg
