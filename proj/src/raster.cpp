#include "evflow/raster.hpp"

#include <string>

#include "evflow/error.hpp"
#include "evflow/image_io.hpp"

namespace evflow {

Raster::Raster(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw Error(Errc::invalid_argument,
                "raster dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
  }
  const auto expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (data_.size() != expected) {
    throw Error(Errc::invalid_argument, "raster buffer holds " + std::to_string(data_.size()) + " bytes, expected " +
                                            std::to_string(expected));
  }
}

Raster Raster::filled(int width, int height, Rgb color) {
  return generate(width, height, [color](int, int) { return color; });
}

Raster Raster::generate(int width, int height, const std::function<Rgb(int, int)>& fn) {
  if (width < 1 || height < 1) {
    throw Error(Errc::invalid_argument, "raster dimensions must be positive");
  }
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * 3);
  std::size_t i = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Rgb c = fn(x, y);
      data[i++] = c.r;
      data[i++] = c.g;
      data[i++] = c.b;
    }
  }
  return Raster(width, height, std::move(data));
}

Rgb Raster::pixel(int x, int y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) {
    throw Error(Errc::invalid_argument, "pixel out of bounds");
  }
  const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {data_[i], data_[i + 1], data_[i + 2]};
}

Raster Raster::crop(const Rect& rect) const {
  if (rect.empty() || rect.x < 0 || rect.y < 0 || rect.x + rect.w > width_ || rect.y + rect.h > height_) {
    throw Error(Errc::invalid_argument, "crop rectangle outside raster");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(rect.w) * rect.h * 3);
  const std::size_t row_bytes = static_cast<std::size_t>(rect.w) * 3;
  for (int r = 0; r < rect.h; ++r) {
    const auto src = (static_cast<std::size_t>(rect.y + r) * width_ + rect.x) * 3;
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(src), row_bytes,
                out.begin() + static_cast<std::ptrdiff_t>(r * row_bytes));
  }
  return Raster(rect.w, rect.h, std::move(out));
}

std::string Raster::digest() const {
  const std::string header = "RGB8 " + std::to_string(width_) + "x" + std::to_string(height_) + "\n";
  std::vector<std::uint8_t> buf(header.begin(), header.end());
  buf.insert(buf.end(), data_.begin(), data_.end());
  return sha256_hex(buf);
}

}  // namespace evflow
