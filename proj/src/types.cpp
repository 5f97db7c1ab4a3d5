#include "evflow/types.hpp"

#include <cctype>
#include <cmath>

#include "evflow/error.hpp"
#include "evflow/image_io.hpp"

namespace evflow {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

FrameSequence::FrameSequence(std::vector<Frame> frames, std::string source_id, nlohmann::json meta)
    : frames_(std::move(frames)), source_id_(std::move(source_id)), meta_(std::move(meta)) {
  if (frames_.empty()) {
    throw Error(Errc::invalid_argument, "frame sequence is empty");
  }
  for (std::size_t i = 1; i < frames_.size(); ++i) {
    if (frames_[i].index <= frames_[i - 1].index) {
      throw Error(Errc::invalid_argument, "frame indices must be strictly increasing");
    }
  }
}

std::string FrameSequence::digest() const {
  std::string acc;
  for (const auto& f : frames_) {
    acc += std::to_string(f.index);
    acc += ':';
    acc += f.raster.digest();
    acc += '\n';
  }
  return sha256_hex({reinterpret_cast<const std::uint8_t*>(acc.data()), acc.size()});
}

void SubQuery::validate() const {
  if (trim(q_text).empty() || trim(q_vis).empty()) {
    throw Error(Errc::invalid_argument, "sub-query " + id + " has an empty q_text or q_vis");
  }
  if (generation < 0) {
    throw Error(Errc::invalid_argument, "sub-query generation must be >= 0");
  }
  if (generation > 0 && !parent_id) {
    throw Error(Errc::invalid_argument, "refined sub-query " + id + " has no parent");
  }
}

nlohmann::json SubQuery::to_json() const {
  nlohmann::json j{{"id", id}, {"q_text", q_text}, {"q_vis", q_vis}, {"generation", generation}};
  j["parent_id"] = parent_id ? nlohmann::json(*parent_id) : nlohmann::json(nullptr);
  return j;
}

EmbeddingVector::EmbeddingVector(std::vector<double> values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
  if (values_.empty()) {
    throw Error(Errc::protocol, "embedding has no values");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(Errc::protocol, "embedding contains a non-finite value");
  }
  if (normalized_ && std::abs(norm() - 1.0) > 1e-6) {
    throw Error(Errc::invalid_argument, "embedding flagged normalized but has norm " + std::to_string(norm()));
  }
}

EmbeddingVector EmbeddingVector::normalized_from(std::vector<double> values) {
  EmbeddingVector raw(std::move(values));
  const double n = raw.norm();
  if (n == 0.0) throw Error(Errc::zero_vector, "cannot normalize a zero embedding");
  std::vector<double> out = raw.values_;
  for (double& v : out) v /= n;
  return EmbeddingVector(std::move(out), true);
}

double EmbeddingVector::norm() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

}  // namespace evflow
