#include "evflow/trace.hpp"

#include <chrono>
#include <fstream>

#include "evflow/error.hpp"

namespace evflow {

using nlohmann::json;

json TraceEvent::to_json() const {
  return {{"seq", seq}, {"stage", stage}, {"wall_time", wall_time}, {"payload", payload}};
}

TraceEvent TraceEvent::from_json(const json& j) {
  if (!j.is_object() || !j.contains("seq") || !j["seq"].is_number_unsigned() || !j.contains("stage") ||
      !j["stage"].is_string() || !j.contains("payload")) {
    throw Error(Errc::schema, "trace event needs seq, stage and payload");
  }
  TraceEvent e;
  e.seq = j["seq"].get<std::uint64_t>();
  e.stage = j["stage"].get<std::string>();
  e.payload = j["payload"];
  if (j.contains("wall_time") && j["wall_time"].is_number()) e.wall_time = j["wall_time"].get<double>();
  return e;
}

bool TraceEvent::same_as(const TraceEvent& other) const {
  return seq == other.seq && stage == other.stage && payload == other.payload;
}

void Trace::emit(std::string stage, json payload) {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  TraceEvent e;
  e.seq = events_.size();
  e.stage = std::move(stage);
  e.payload = std::move(payload);
  e.wall_time = std::chrono::duration<double>(now).count();
  events_.push_back(std::move(e));
}

void Trace::warn(std::string kind, json detail) {
  emit("warning", {{"kind", std::move(kind)}, {"detail", std::move(detail)}});
}

std::size_t Trace::count(std::string_view stage) const {
  std::size_t n = 0;
  for (const auto& e : events_) n += e.stage == stage ? 1 : 0;
  return n;
}

std::size_t Trace::count_prefix(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& e : events_) n += e.stage.starts_with(prefix) ? 1 : 0;
  return n;
}

void write_trace(const std::vector<TraceEvent>& events, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write trace " + path.string());
  for (const auto& e : events) out << e.to_json().dump() << '\n';
  if (!out) throw Error(Errc::io, "failed writing trace " + path.string());
}

std::vector<TraceEvent> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read trace " + path.string());
  std::vector<TraceEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(Errc::schema, path.string() + ":" + std::to_string(lineno) + ": malformed JSON");
    }
    try {
      events.push_back(TraceEvent::from_json(j));
    } catch (const Error& e) {
      throw Error(Errc::schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return events;
}

std::string canonical_trace(const std::vector<TraceEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    json j = e.to_json();
    j.erase("wall_time");
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace evflow
