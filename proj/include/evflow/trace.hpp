#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace evflow {

struct TraceEvent {
  std::uint64_t seq = 0;
  std::string stage;  // plan, scout.*, arbitration, board.*, refine, synthesis, answer, warning
  nlohmann::json payload;
  double wall_time = 0.0;  // seconds since the Unix epoch

  nlohmann::json to_json() const;
  static TraceEvent from_json(const nlohmann::json& j);

  /// Equality ignoring wall_time.
  bool same_as(const TraceEvent& other) const;
};

/// Append-only run log for one question.
class Trace {
 public:
  void emit(std::string stage, nlohmann::json payload);
  void warn(std::string kind, nlohmann::json detail);

  const std::vector<TraceEvent>& events() const noexcept { return events_; }
  std::size_t count(std::string_view stage) const;
  std::size_t count_prefix(std::string_view prefix) const;

 private:
  std::vector<TraceEvent> events_;
};

/// Emits into a trace when one is attached.
inline void trace_emit(Trace* trace, std::string stage, nlohmann::json payload) {
  if (trace) trace->emit(std::move(stage), std::move(payload));
}
inline void trace_warn(Trace* trace, std::string kind, nlohmann::json detail) {
  if (trace) trace->warn(std::move(kind), std::move(detail));
}

void write_trace(const std::vector<TraceEvent>& events, const std::filesystem::path& path);
std::vector<TraceEvent> read_trace(const std::filesystem::path& path);

/// JSONL with wall_time removed; equal strings mean equivalent runs.
std::string canonical_trace(const std::vector<TraceEvent>& events);

}  // namespace evflow
