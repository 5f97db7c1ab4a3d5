#include "evflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "evflow/error.hpp"

namespace evflow {

using nlohmann::json;

std::string_view to_string(Ablation a) noexcept {
  switch (a) {
    case Ablation::no_hdd: return "no_hdd";
    case Ablation::no_hap: return "no_hap";
    case Ablation::no_eba: return "no_eba";
    case Ablation::no_spatial: return "no_spatial";
    case Ablation::no_temporal: return "no_temporal";
  }
  return "?";
}

std::optional<Ablation> parse_ablation(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '-', '_');
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto a : {Ablation::no_hdd, Ablation::no_hap, Ablation::no_eba, Ablation::no_spatial, Ablation::no_temporal}) {
    if (s == to_string(a)) return a;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void invalid(const std::string& key, const std::string& reason) {
  throw ConfigError(Errc::invalid_config, key, reason);
}

long long read_int(const std::string& key, const json& v) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
  }
  invalid(key, "must be an integer");
}

double read_real(const std::string& key, const json& v) {
  if (!v.is_number()) invalid(key, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid(key, "must be finite");
  return d;
}

int read_int_min(const std::string& key, const json& v, long long min) {
  const long long x = read_int(key, v);
  if (x < min) invalid(key, "must be >= " + std::to_string(min));
  if (x > std::numeric_limits<int>::max()) invalid(key, "too large");
  return static_cast<int>(x);
}

struct Field {
  std::string name;
  std::vector<std::string> aliases;
  std::function<void(PipelineConfig&, const std::string& key, const json&)> set;
  std::function<json(const PipelineConfig&)> get;
};

template <typename M>
Field string_field(std::string name, M PipelineConfig::*member) {
  return {name, {},
          [member](PipelineConfig& c, const std::string& key, const json& v) {
            if (!v.is_string()) invalid(key, "must be a string");
            c.*member = v.get<std::string>();
          },
          [member](const PipelineConfig& c) { return json(c.*member); }};
}

Field int_field(std::string name, std::vector<std::string> aliases, int PipelineConfig::*member, long long min) {
  return {name, std::move(aliases),
          [member, min](PipelineConfig& c, const std::string& key, const json& v) {
            c.*member = read_int_min(key, v, min);
          },
          [member](const PipelineConfig& c) { return json(c.*member); }};
}

Field bool_field(std::string name, bool PipelineConfig::*member) {
  return {name, {},
          [member](PipelineConfig& c, const std::string& key, const json& v) {
            if (!v.is_boolean()) invalid(key, "must be a boolean");
            c.*member = v.get<bool>();
          },
          [member](const PipelineConfig& c) { return json(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field("frame_budget", {"T"}, &PipelineConfig::frame_budget, 1));
    f.push_back({"smooth_kernel", {"k"},
                 [](PipelineConfig& c, const std::string& key, const json& v) {
                   const int k = read_int_min(key, v, 1);
                   if (k % 2 == 0) invalid(key, "must be odd");
                   c.smooth_kernel = k;
                 },
                 [](const PipelineConfig& c) { return json(c.smooth_kernel); }});
    f.push_back(int_field("top_k", {"K"}, &PipelineConfig::top_k, 1));
    f.push_back(int_field("grid_n", {"N"}, &PipelineConfig::grid_n, 1));
    f.push_back({"tau", {"τ"},
                 [](PipelineConfig& c, const std::string& key, const json& v) {
                   const double t = read_real(key, v);
                   if (t < 0.0 || t > 1.0) invalid(key, "out of [0,1]");
                   c.tau = t;
                 },
                 [](const PipelineConfig& c) { return json(c.tau); }});
    f.push_back(int_field("max_refinements", {}, &PipelineConfig::max_refinements, 0));
    f.push_back(int_field("max_subqueries", {}, &PipelineConfig::max_subqueries, 1));
    f.push_back({"ablations", {},
                 [](PipelineConfig& c, const std::string& key, const json& v) {
                   std::vector<std::string> names;
                   if (v.is_string()) {
                     std::string s = v.get<std::string>();
                     std::size_t pos = 0;
                     while (pos <= s.size()) {
                       const auto comma = s.find(',', pos);
                       const auto item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
                       if (!item.empty()) names.push_back(item);
                       if (comma == std::string::npos) break;
                       pos = comma + 1;
                     }
                   } else if (v.is_array()) {
                     for (const auto& item : v) {
                       if (!item.is_string()) invalid(key, "entries must be strings");
                       names.push_back(item.get<std::string>());
                     }
                   } else {
                     invalid(key, "must be a list of ablation names");
                   }
                   c.ablations.clear();
                   for (const auto& n : names) {
                     auto a = parse_ablation(n);
                     if (!a) invalid(key, "unknown ablation '" + n + "'");
                     c.ablations.insert(*a);
                   }
                 },
                 [](const PipelineConfig& c) {
                   json arr = json::array();
                   for (auto a : c.ablations) arr.push_back(std::string(to_string(a)));
                   return arr;
                 }});
    f.push_back(string_field("chat_endpoint", &PipelineConfig::chat_endpoint));
    f.push_back(string_field("embed_endpoint", &PipelineConfig::embed_endpoint));
    f.push_back(string_field("judge_endpoint", &PipelineConfig::judge_endpoint));
    f.push_back(string_field("planner_model", &PipelineConfig::planner_model));
    f.push_back(string_field("vlm_model", &PipelineConfig::vlm_model));
    f.push_back(string_field("embed_model", &PipelineConfig::embed_model));
    f.push_back(string_field("judge_model", &PipelineConfig::judge_model));
    f.push_back({"seed", {},
                 [](PipelineConfig& c, const std::string& key, const json& v) { c.seed = read_int(key, v); },
                 [](const PipelineConfig& c) { return json(c.seed); }});
    f.push_back({"request_timeout", {},
                 [](PipelineConfig& c, const std::string& key, const json& v) {
                   const double t = read_real(key, v);
                   if (t <= 0.0) invalid(key, "must be > 0");
                   c.request_timeout = t;
                 },
                 [](const PipelineConfig& c) { return json(c.request_timeout); }});
    f.push_back(int_field("workers", {}, &PipelineConfig::workers, 1));
    f.push_back({"temperature", {},
                 [](PipelineConfig& c, const std::string& key, const json& v) {
                   const double t = read_real(key, v);
                   if (t < 0.0) invalid(key, "must be >= 0");
                   c.temperature = t;
                 },
                 [](const PipelineConfig& c) { return json(c.temperature); }});
    f.push_back(int_field("plan_max_tokens", {}, &PipelineConfig::plan_max_tokens, 1));
    f.push_back(int_field("arbitration_max_tokens", {}, &PipelineConfig::arbitration_max_tokens, 1));
    f.push_back(int_field("synthesis_max_tokens", {}, &PipelineConfig::synthesis_max_tokens, 1));
    f.push_back(bool_field("include_evidence_crops", &PipelineConfig::include_evidence_crops));
    f.push_back(int_field("oracle_frames", {}, &PipelineConfig::oracle_frames, 1));
    f.push_back(bool_field("oracle_per_subquery", &PipelineConfig::oracle_per_subquery));
    f.push_back(string_field("planner_prompt", &PipelineConfig::planner_prompt));
    f.push_back(string_field("refinement_prompt", &PipelineConfig::refinement_prompt));
    f.push_back(string_field("arbitration_prompt", &PipelineConfig::arbitration_prompt));
    f.push_back(string_field("synthesis_prompt", &PipelineConfig::synthesis_prompt));
    f.push_back(string_field("oracle_system_prompt", &PipelineConfig::oracle_system_prompt));
    f.push_back(string_field("oracle_user_prompt", &PipelineConfig::oracle_user_prompt));
    return f;
  }();
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.name == key) return &f;
    for (const auto& a : f.aliases) {
      if (a == key) return &f;
    }
  }
  return nullptr;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

json canonicalized(const json& raw, const char* layer) {
  if (raw.is_null()) return json::object();
  if (!raw.is_object()) throw ConfigError(Errc::invalid_config, layer, "configuration must be a JSON object");
  json out = json::object();
  for (const auto& [key, value] : raw.items()) {
    const auto canon = canonical_key(key);
    out[canon ? *canon : key] = value;
  }
  return out;
}

}  // namespace

std::optional<std::string> canonical_key(std::string_view key) {
  const Field* f = find_field(key);
  if (!f) return std::nullopt;
  return f->name;
}

PipelineConfig validate_config(const json& raw) {
  PipelineConfig cfg;
  if (raw.is_null()) return cfg;
  if (!raw.is_object()) throw ConfigError(Errc::invalid_config, "<root>", "configuration must be a JSON object");
  std::map<std::string, std::string> seen;  // canonical -> key used
  for (const auto& [key, value] : raw.items()) {
    const Field* f = find_field(key);
    if (!f) invalid(key, "unknown key");
    if (auto it = seen.find(f->name); it != seen.end()) {
      invalid(key, "duplicates '" + it->second + "'");
    }
    seen.emplace(f->name, key);
    f->set(cfg, key, value);
  }
  if (cfg.has(Ablation::no_hap) && (cfg.has(Ablation::no_spatial) || cfg.has(Ablation::no_temporal))) {
    throw ConfigError(Errc::conflict, "ablations", "no_hap already disables spatial and temporal focusing");
  }
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  json out = json::object();
  for (const auto& f : fields()) out[f.name] = f.get(cfg);
  return out;
}

json env_overrides(const EnvLookup& getenv) {
  json out = json::object();
  for (const auto& f : fields()) {
    const std::string var = "EVFLOW_" + upper(f.name);
    const char* value = getenv(var.c_str());
    if (!value) continue;
    const std::string text(value);
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded() || parsed.is_object()) parsed = text;
    // Keep string-typed fields as the literal text even when it parses as JSON.
    if (f.get(PipelineConfig{}).is_string()) parsed = text;
    out[f.name] = parsed;
  }
  return out;
}

PipelineConfig load_config(const std::optional<std::string>& file_path, const json& cli_overrides,
                           const EnvLookup& getenv) {
  json merged = json::object();
  if (file_path) {
    std::ifstream in(*file_path);
    if (!in) throw Error(Errc::io, "cannot open config file " + *file_path);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ConfigError(Errc::invalid_config, *file_path, "not valid JSON");
    merged.update(canonicalized(file, "config file"));
  }
  merged.update(canonicalized(env_overrides(getenv), "environment"));
  merged.update(canonicalized(cli_overrides, "command line"));
  return validate_config(merged);
}

}  // namespace evflow
