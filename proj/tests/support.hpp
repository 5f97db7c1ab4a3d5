#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evflow/harness.hpp"
#include "evflow/ingest.hpp"
#include "evflow/mock.hpp"
#include "evflow/orchestrator.hpp"

namespace evflow::testkit {

inline std::filesystem::path fixture_dir() { return EVFLOW_FIXTURE_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("evflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Small deterministic generator shared by the property tests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(gen_); }
  std::vector<double> reals(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = real(lo, hi);
    return v;
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

/// Mock backends for the bundled traffic-light fixture.
struct FixtureBackends {
  BackendScript script = BackendScript::load(fixture_dir() / "script.json");
  ScriptedChat chat{script.chat};
  ScriptedChat judge{script.judge};
  ScriptedEmbedder embed{script.embeddings};

  Backends backends() { return {chat, embed}; }
};

inline FrameSequence fixture_frames(std::size_t budget = 32) { return load_frames(fixture_dir() / "frames", budget); }

inline std::vector<TaskManifestEntry> fixture_manifest() { return load_manifest(fixture_dir() / "manifest.jsonl"); }

inline const TaskManifestEntry& intersection_task() {
  static const auto manifest = fixture_manifest();
  return manifest.at(0);
}

/// Frames whose pixels all share one colour; the red channel carries the id.
inline Raster id_frame(int id, int w = 8, int h = 8) {
  return Raster::filled(w, h, Rgb{static_cast<std::uint8_t>(id), 0, 0});
}

inline FrameSequence id_frames(int n) {
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) frames.push_back({i, id_frame(i)});
  return FrameSequence(std::move(frames), "synthetic");
}

}  // namespace evflow::testkit
