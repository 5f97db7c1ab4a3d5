#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace evflow {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Pixel rectangle, half-open: covers [x, x+w) x [y, y+h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const noexcept { return static_cast<long long>(w) * h; }
  bool empty() const noexcept { return w <= 0 || h <= 0; }
  bool operator==(const Rect&) const = default;
};

/// Immutable 8-bit RGB image, row-major, 3 bytes per pixel.
class Raster {
 public:
  Raster(int width, int height, std::vector<std::uint8_t> data);

  static Raster filled(int width, int height, Rgb color);
  static Raster generate(int width, int height, const std::function<Rgb(int x, int y)>& fn);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  Rgb pixel(int x, int y) const;
  Rect bounds() const noexcept { return {0, 0, width_, height_}; }

  /// Copy of the pixels inside `rect`. Throws when rect is empty or out of bounds.
  Raster crop(const Rect& rect) const;

  /// Hex SHA-256 over dimensions and pixel bytes.
  std::string digest() const;

  bool operator==(const Raster&) const = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

}  // namespace evflow
