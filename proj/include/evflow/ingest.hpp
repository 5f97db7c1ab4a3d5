#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/types.hpp"

namespace evflow {

/// Frame files of one pre-extracted video, sorted by file name.
struct FrameManifest {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
  std::size_t total_source_frames = 0;
  nlohmann::json meta;  // contents of meta.json, or null
};

/// Filename order where digit runs compare numerically ("f9" < "f10").
bool natural_less(const std::string& a, const std::string& b);

/// Lists `<dir>/*.{png,jpg,jpeg}`. Throws Errc::empty_directory when none exist.
FrameManifest scan_frames(const std::filesystem::path& dir);

/// Positions floor(i*n/count) for i in [0, count); all of [0, n) when n <= count.
std::vector<std::size_t> uniform_positions(std::size_t n, std::size_t count);

/// Decodes at most `budget` uniformly spaced frames, keeping source ordinals.
FrameSequence load_frames(const std::filesystem::path& dir, std::size_t budget);

}  // namespace evflow
