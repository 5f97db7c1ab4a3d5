#include "evflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "evflow/error.hpp"
#include "evflow/ingest.hpp"
#include "evflow/perception.hpp"
#include "evflow/planner.hpp"

namespace evflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string() || trim(j[key].get<std::string>()).empty()) {
    throw Error(Errc::schema, std::string("field '") + key + "' must be a non-empty string");
  }
  return j[key].get<std::string>();
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
}

}  // namespace

TaskManifestEntry parse_manifest_entry(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::schema, "entry must be a JSON object");
  TaskManifestEntry e;
  e.id = required_string(j, "id");
  e.question = required_string(j, "question");
  fs::path dir = required_string(j, "frames_dir");
  e.frames_dir = dir.is_absolute() ? dir : base_dir / dir;

  if (!j.contains("options") || !j["options"].is_array()) throw Error(Errc::schema, "field 'options' must be a list");
  std::set<std::string> letters;
  for (const auto& o : j["options"]) {
    if (!o.is_object()) throw Error(Errc::schema, "each option must be an object with letter and text");
    Option opt{required_string(o, "letter"), required_string(o, "text")};
    if (!letters.insert(upper(opt.letter)).second) {
      throw Error(Errc::schema, "duplicate option letter '" + opt.letter + "'");
    }
    e.options.push_back(std::move(opt));
  }
  if (e.options.size() < 2) throw Error(Errc::schema, "at least two options are required");
  e.answer = upper(required_string(j, "answer"));
  if (!letters.contains(e.answer)) {
    throw Error(Errc::schema, "answer '" + e.answer + "' is not among the option letters");
  }
  return e;
}

std::vector<TaskManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<TaskManifestEntry> entries;
  std::map<std::string, std::vector<std::size_t>> lines_by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw Error(Errc::schema, where + "malformed JSON");
    }
    try {
      entries.push_back(parse_manifest_entry(j, base));
    } catch (const Error& e) {
      throw Error(Errc::schema, where + e.what());
    }
    lines_by_id[entries.back().id].push_back(lineno);
  }
  std::string dups;
  for (const auto& [id, lines] : lines_by_id) {
    if (lines.size() < 2) continue;
    if (!dups.empty()) dups += "; ";
    dups += id + " (lines";
    for (auto l : lines) dups += " " + std::to_string(l);
    dups += ")";
  }
  if (!dups.empty()) throw Error(Errc::schema, path.string() + ": duplicate ids: " + dups);
  return entries;
}

json EvalReport::to_json() const {
  json rows = json::array();
  std::size_t correct = 0;
  for (const auto& t : tasks) {
    correct += t.correct ? 1 : 0;
    rows.push_back({{"id", t.id},
                    {"predicted", t.predicted},
                    {"answer", t.answer},
                    {"correct", t.correct},
                    {"errored", t.errored}});
  }
  return {{"label", label},     {"accuracy", accuracy}, {"total", tasks.size()}, {"correct", correct},
          {"parsed", parsed},   {"unparsed", unparsed}, {"errored", errored},    {"config", config},
          {"tasks", rows}};
}

EvalReport evaluate(const std::vector<TaskManifestEntry>& manifest, const PipelineConfig& cfg, Backends backends,
                    const PromptSet& prompts, const EvalOptions& options) {
  if (options.out_dir) fs::create_directories(*options.out_dir);
  std::vector<AnswerRecord> records(manifest.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < manifest.size(); i = next++) {
      const auto& entry = manifest[i];
      Trace trace;
      AnswerRecord rec;
      try {
        const FrameSequence frames = load_frames(entry.frames_dir, static_cast<std::size_t>(cfg.frame_budget));
        rec = answer_question(frames, entry.question, entry.options, cfg, backends, prompts, trace, entry.id);
      } catch (const std::exception& e) {
        const auto* err = dynamic_cast<const Error*>(&e);
        rec = AnswerRecord{};
        rec.question_id = entry.id;
        rec.config = config_to_json(cfg);
        rec.error = std::string(err ? to_string(err->code()) : "Internal") + ": " + e.what();
        trace.emit("answer", {{"question_id", entry.id}, {"predicted", rec.predicted}, {"error", *rec.error}});
      }
      if (options.out_dir) write_trace(trace.events(), *options.out_dir / (entry.id + ".trace.jsonl"));
      records[i] = std::move(rec);
    }
  };

  const auto n_workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.workers, 1)), 1,
                                                 std::max<std::size_t>(manifest.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  EvalReport report;
  report.label = options.label;
  report.config = config_to_json(cfg);
  std::size_t correct = 0;
  std::string answers;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& rec = records[i];
    TaskResult t{manifest[i].id, rec.predicted, manifest[i].answer, false, rec.error.has_value()};
    t.correct = !t.errored && upper(t.predicted) == t.answer;
    if (t.errored) {
      ++report.errored;
    } else if (t.predicted == kUnparsed) {
      ++report.unparsed;
    } else {
      ++report.parsed;
    }
    correct += t.correct ? 1 : 0;
    report.tasks.push_back(t);
    json line = rec.to_json();
    line["answer"] = t.answer;
    line["correct"] = t.correct;
    answers += line.dump() + "\n";
  }
  report.accuracy = manifest.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(manifest.size());

  if (options.out_dir) {
    write_text(*options.out_dir / "answers.jsonl", answers);
    write_text(*options.out_dir / "report.json", report.to_json().dump(2) + "\n");
  }
  return report;
}

namespace {

struct SweepParam {
  std::string canonical;
  std::string short_name;
  bool integral;
};

SweepParam sweep_param(const std::string& name) {
  const auto canon = canonical_key(name);
  if (canon == "smooth_kernel") return {*canon, "k", true};
  if (canon == "top_k") return {*canon, "K", true};
  if (canon == "grid_n") return {*canon, "N", true};
  if (canon == "tau") return {*canon, "tau", false};
  throw ConfigError(Errc::invalid_config, name, "not a sweepable parameter (use k, K, N or tau)");
}

std::string format_value(double v, bool integral) {
  if (integral) return std::to_string(static_cast<long long>(v));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::vector<PipelineConfig> expand_sweep(const PipelineConfig& base, const SweepGrid& grid,
                                         std::vector<std::string>* labels) {
  if (grid.empty()) throw Error(Errc::invalid_argument, "sweep grid is empty");
  std::vector<std::pair<SweepParam, std::vector<double>>> axes;
  std::set<std::string> seen;
  for (const auto& [name, values] : grid) {
    SweepParam p = sweep_param(name);
    if (!seen.insert(p.canonical).second) throw ConfigError(Errc::invalid_config, name, "given twice in the grid");
    if (values.empty()) throw ConfigError(Errc::invalid_config, name, "has no sweep values");
    axes.emplace_back(p, values);
  }

  std::vector<PipelineConfig> configs;
  std::vector<std::string> names;
  std::vector<std::size_t> idx(axes.size(), 0);
  const json base_json = config_to_json(base);
  while (true) {
    json point = base_json;
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& [p, values] = axes[a];
      const double v = values[idx[a]];
      if (p.integral && std::floor(v) == v) {
        point[p.canonical] = static_cast<long long>(v);
      } else {
        point[p.canonical] = v;
      }
      if (!label.empty()) label += ",";
      label += p.short_name + "=" + format_value(v, p.integral && std::floor(v) == v);
    }
    configs.push_back(validate_config(point));
    names.push_back(label);

    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
      if (a == 0) {
        if (labels) *labels = std::move(names);
        return configs;
      }
    }
  }
}

std::vector<EvalReport> sweep(const std::vector<TaskManifestEntry>& manifest, const PipelineConfig& cfg,
                              const SweepGrid& grid, Backends backends, const PromptSet& prompts,
                              const std::optional<fs::path>& out_dir) {
  std::vector<std::string> labels;
  const auto configs = expand_sweep(cfg, grid, &labels);
  std::vector<EvalReport> reports;
  json summary = json::array();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    EvalOptions opts;
    opts.label = labels[i];
    if (out_dir) opts.out_dir = *out_dir / labels[i];
    reports.push_back(evaluate(manifest, configs[i], backends, prompts, opts));
    summary.push_back({{"label", labels[i]}, {"accuracy", reports.back().accuracy}});
  }
  if (out_dir) write_text(*out_dir / "sweep.json", summary.dump(2) + "\n");
  return reports;
}

json OracleReport::to_json() const {
  json rows = json::array();
  for (const auto& s : samples) {
    rows.push_back({{"id", s.id},
                    {"baseline_scores", s.baseline_scores},
                    {"baseline_mean", s.baseline_mean},
                    {"hap_score", s.hap_score}});
  }
  return {{"samples", rows},
          {"skipped", skipped},
          {"avg_baseline", avg_baseline},
          {"avg_hap", avg_hap},
          {"high_sufficiency_rate_baseline", high_sufficiency_rate_baseline},
          {"high_sufficiency_rate_hap", high_sufficiency_rate_hap},
          {"seed", seed}};
}

std::optional<int> parse_judge_score(std::string_view reply) {
  static const std::regex number(R"(\d+)");
  const std::string text(reply);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number); it != std::sregex_iterator(); ++it) {
    const std::string digits = it->str();
    if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '5') return digits[0] - '0';
  }
  return std::nullopt;
}

void aggregate_oracle(OracleReport& report) {
  report.avg_baseline = report.avg_hap = 0.0;
  report.high_sufficiency_rate_baseline = report.high_sufficiency_rate_hap = 0.0;
  if (report.samples.empty()) return;
  std::size_t hi_base = 0;
  std::size_t hi_hap = 0;
  for (auto& s : report.samples) {
    double sum = 0.0;
    for (int v : s.baseline_scores) sum += v;
    s.baseline_mean = s.baseline_scores.empty() ? 0.0 : sum / static_cast<double>(s.baseline_scores.size());
    report.avg_baseline += s.baseline_mean;
    report.avg_hap += s.hap_score;
    hi_base += s.baseline_mean >= kHighSufficiency ? 1 : 0;
    hi_hap += s.hap_score >= kHighSufficiency ? 1 : 0;
  }
  const auto n = static_cast<double>(report.samples.size());
  report.avg_baseline /= n;
  report.avg_hap /= n;
  report.high_sufficiency_rate_baseline = static_cast<double>(hi_base) / n;
  report.high_sufficiency_rate_hap = static_cast<double>(hi_hap) / n;
}

namespace {

std::optional<int> judge_once(ChatClient& judge, const PipelineConfig& cfg, const PromptSet& prompts,
                              const std::string& query, const std::string& note, const Raster& image) {
  std::vector<ChatMessage> messages{
      ChatMessage::system_text(prompts.oracle_system),
      {Role::user, {TextPart{render_oracle_user(prompts.oracle_user, query, note)}, ImagePart{image}}}};
  return parse_judge_score(judge.chat(messages, {cfg.temperature, cfg.arbitration_max_tokens, "judge"}).text);
}

}  // namespace

OracleReport oracle_assess(const std::vector<TaskManifestEntry>& manifest, const PipelineConfig& cfg,
                           Backends pipeline, ChatClient& judge, const PromptSet& prompts,
                           const OracleOptions& options) {
  OracleReport report;
  report.seed = cfg.seed;

  std::vector<std::size_t> chosen(manifest.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (options.sample && *options.sample < chosen.size()) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.seed));
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(*options.sample);
    std::sort(chosen.begin(), chosen.end());
  }

  for (std::size_t i : chosen) {
    const auto& entry = manifest[i];
    try {
      OracleSample sample;
      sample.id = entry.id;
      const FrameSequence uniform = load_frames(entry.frames_dir, static_cast<std::size_t>(cfg.oracle_frames));
      bool usable = true;
      for (const auto& f : uniform.frames()) {
        auto s = judge_once(judge, cfg, prompts, entry.question, "", f.raster);
        if (!s) {
          usable = false;
          break;
        }
        sample.baseline_scores.push_back(*s);
      }
      if (!usable) {
        report.skipped.push_back(entry.id + ": unparseable judge reply (baseline)");
        continue;
      }

      const FrameSequence frames = load_frames(entry.frames_dir, static_cast<std::size_t>(cfg.frame_budget));
      std::vector<SubQuery> queries;
      if (cfg.oracle_per_subquery) {
        queries = decompose(entry.question, pipeline.chat, cfg, prompts).subqueries;
      } else {
        queries.push_back({"oracle", entry.question, entry.question, 0, std::nullopt});
      }
      double hap_sum = 0.0;
      for (const auto& sq : queries) {
        const Evidence e = scout(frames, sq, cfg, pipeline.embed, {});
        auto s = judge_once(judge, cfg, prompts, sq.q_text, std::string(kHapContextNote), e.crop);
        if (!s) {
          usable = false;
          break;
        }
        hap_sum += *s;
      }
      if (!usable) {
        report.skipped.push_back(entry.id + ": unparseable judge reply (HAP)");
        continue;
      }
      sample.hap_score = hap_sum / static_cast<double>(queries.size());
      report.samples.push_back(std::move(sample));
    } catch (const Error& e) {
      report.skipped.push_back(entry.id + ": " + e.what());
    }
  }
  aggregate_oracle(report);
  return report;
}

std::string render_oracle_table(const OracleReport& report) {
  auto row = [](const char* method, double avg, double rate) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "| %-16s | %16.2f | %21.1f%% |\n", method, avg, rate * 100.0);
    return std::string(buf);
  };
  std::string out = "| Method           | Avg. Score (1-5) | High-Sufficiency Rate |\n";
  out += "|------------------|------------------|-----------------------|\n";
  out += row("Uniform Sampling", report.avg_baseline, report.high_sufficiency_rate_baseline);
  out += row("HAP", report.avg_hap, report.high_sufficiency_rate_hap);
  return out;
}

}  // namespace evflow
