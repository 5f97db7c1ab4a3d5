#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/raster.hpp"

namespace evflow {

struct Frame {
  int index = 0;  // ordinal in the source video
  Raster raster;
};

/// Ordered decoded frames of one video. Indices strictly increase.
class FrameSequence {
 public:
  FrameSequence(std::vector<Frame> frames, std::string source_id, nlohmann::json meta = nullptr);

  const std::vector<Frame>& frames() const noexcept { return frames_; }
  std::size_t size() const noexcept { return frames_.size(); }
  const Frame& operator[](std::size_t pos) const { return frames_.at(pos); }
  const std::string& source_id() const noexcept { return source_id_; }
  const nlohmann::json& meta() const noexcept { return meta_; }

  /// Digest over every frame index and raster digest.
  std::string digest() const;

 private:
  std::vector<Frame> frames_;
  std::string source_id_;
  nlohmann::json meta_;
};

struct SubQuery {
  std::string id;
  std::string q_text;
  std::string q_vis;
  int generation = 0;
  std::optional<std::string> parent_id;

  void validate() const;
  nlohmann::json to_json() const;
  bool operator==(const SubQuery&) const = default;
};

struct ReasoningPlan {
  std::vector<SubQuery> subqueries;
  std::string original_question;
};

/// Finite real vector produced by an embedding backend.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values, bool normalized = false);

  /// L2-normalized copy; throws Errc::zero_vector for an all-zero input.
  static EmbeddingVector normalized_from(std::vector<double> values);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t dims() const noexcept { return values_.size(); }
  bool normalized() const noexcept { return normalized_; }
  double norm() const noexcept;

 private:
  std::vector<double> values_;
  bool normalized_;
};

std::string trim(std::string_view s);

}  // namespace evflow
