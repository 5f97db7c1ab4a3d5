#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evflow/raster.hpp"

namespace evflow {

/// Decodes PNG or JPEG bytes into RGB8; grayscale and alpha inputs are converted.
Raster decode_image(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");
Raster decode_image_file(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Raster& raster);
void write_png(const Raster& raster, const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace evflow
