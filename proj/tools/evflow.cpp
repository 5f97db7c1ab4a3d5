#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <regex>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evflow/config.hpp"
#include "evflow/error.hpp"
#include "evflow/harness.hpp"
#include "evflow/http_client.hpp"
#include "evflow/ingest.hpp"
#include "evflow/mock.hpp"
#include "evflow/orchestrator.hpp"
#include "evflow/stub_server.hpp"
#include "evflow/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace evflow;

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct GlobalFlags {
  std::optional<std::string> config;
  std::string out = "out";
  std::optional<std::int64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> ablate;
  std::optional<double> tau;
  std::optional<int> window_k;
  std::optional<int> topk;
  std::optional<int> grid_n;
  std::optional<int> frames_budget;
  std::optional<std::string> mock_script;
};

PipelineConfig build_config(const GlobalFlags& g) {
  json cli = json::object();
  if (g.seed) cli["seed"] = *g.seed;
  if (g.workers) cli["workers"] = *g.workers;
  if (g.tau) cli["tau"] = *g.tau;
  if (g.window_k) cli["smooth_kernel"] = *g.window_k;
  if (g.topk) cli["top_k"] = *g.topk;
  if (g.grid_n) cli["grid_n"] = *g.grid_n;
  if (g.frames_budget) cli["frame_budget"] = *g.frames_budget;
  if (!g.ablate.empty()) cli["ablations"] = g.ablate;
  return load_config(g.config, cli, [](const char* name) { return std::getenv(name); });
}

/// Owns whichever backend implementation the run uses.
struct BackendSet {
  std::unique_ptr<ChatClient> planner;
  std::unique_ptr<ChatClient> vlm;
  std::unique_ptr<ChatClient> judge;
  std::unique_ptr<EmbedClient> embed;
  std::unique_ptr<RoutedChat> routed;
  std::unique_ptr<ScriptedEmbedder> scripted_embed;  // kept for serve-stub

  Backends pipeline() { return {*routed, *embed}; }
};

BackendSet make_backends(const PipelineConfig& cfg, const GlobalFlags& g) {
  BackendSet b;
  if (g.mock_script) {
    BackendScript script = BackendScript::load(*g.mock_script);
    auto chat = std::make_unique<ScriptedChat>(script.chat);
    b.judge = std::make_unique<ScriptedChat>(script.judge);
    b.scripted_embed = std::make_unique<ScriptedEmbedder>(script.embeddings);
    b.routed = std::make_unique<RoutedChat>(*chat, *chat);
    b.planner = std::move(chat);
    b.embed = std::make_unique<ScriptedEmbedder>(script.embeddings);
    return b;
  }
  if (cfg.chat_endpoint.empty()) throw ConfigError(Errc::invalid_config, "chat_endpoint", "required without --mock-script");
  if (cfg.embed_endpoint.empty()) {
    throw ConfigError(Errc::invalid_config, "embed_endpoint", "required without --mock-script");
  }
  HttpOptions opts;
  opts.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.request_timeout * 1000));
  if (const char* key = std::getenv("EVFLOW_API_KEY")) opts.bearer_token = key;
  b.planner = std::make_unique<HttpChatClient>(cfg.chat_endpoint, cfg.planner_model, opts);
  b.vlm = std::make_unique<HttpChatClient>(cfg.chat_endpoint, cfg.vlm_model, opts);
  b.judge = std::make_unique<HttpChatClient>(cfg.judge_endpoint.empty() ? cfg.chat_endpoint : cfg.judge_endpoint,
                                             cfg.judge_model, opts);
  b.embed = std::make_unique<HttpEmbedClient>(cfg.embed_endpoint, cfg.embed_model, opts);
  b.routed = std::make_unique<RoutedChat>(*b.planner, *b.vlm);
  return b;
}

/// "A:red light,B:a pedestrian" -> lettered options.
std::vector<Option> parse_options(const std::string& listing) {
  static const std::regex marker(R"((?:^|,)\s*([A-Za-z])\s*:)");
  std::vector<std::pair<std::string, std::size_t>> starts;
  std::vector<std::size_t> cuts;
  for (auto it = std::sregex_iterator(listing.begin(), listing.end(), marker); it != std::sregex_iterator(); ++it) {
    cuts.push_back(static_cast<std::size_t>(it->position()));
    starts.emplace_back((*it)[1].str(), static_cast<std::size_t>(it->position() + it->length()));
  }
  if (starts.empty() || cuts.front() != 0) {
    throw Error(Errc::invalid_argument, "options must look like \"A:text,B:text\"");
  }
  std::vector<Option> out;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::size_t end = i + 1 < cuts.size() ? cuts[i + 1] : listing.size();
    out.push_back({starts[i].first, trim(listing.substr(starts[i].second, end - starts[i].second))});
  }
  return out;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const std::string t = trim(item);
      out.push_back(std::stod(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "not a number in --values: '" + item + "'");
    }
  }
  if (out.empty()) throw Error(Errc::invalid_argument, "--values is empty");
  return out;
}

void print_report(const EvalReport& r) {
  std::cout << r.label << ": accuracy " << r.accuracy << " (" << r.tasks.size() << " tasks, parsed " << r.parsed
            << ", unparsed " << r.unparsed << ", errored " << r.errored << ")\n";
}

std::string shorten(std::string s, std::size_t n) {
  if (s.size() > n) s = s.substr(0, n - 3) + "...";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence-grounded video question answering"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--workers", g.workers, "Concurrent questions");
  app.add_option("--ablate", g.ablate, "no-hdd | no-hap | no-eba | no-spatial | no-temporal (repeatable)");
  app.add_option("--tau", g.tau, "Arbitration confidence threshold");
  app.add_option("--window-k", g.window_k, "Smoothing window (odd)");
  app.add_option("--topk", g.topk, "Temporal windows per sub-query");
  app.add_option("--grid-n", g.grid_n, "Grid pyramid size");
  app.add_option("--frames-budget", g.frames_budget, "Frames sampled per video");
  app.add_option("--mock-script", g.mock_script, "Replay backends from a mock script");

  std::string frames_dir, question, options_text, question_id = "ask";
  auto* ask = app.add_subcommand("ask", "Answer one question about a frame directory");
  ask->add_option("--frames", frames_dir, "Directory of extracted frames")->required();
  ask->add_option("--question", question)->required();
  ask->add_option("--options", options_text, "\"A:text,B:text\"")->required();
  ask->add_option("--id", question_id, "Question id used for the trace file");

  std::string manifest_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a task manifest");
  eval->add_option("--manifest", manifest_path)->required();
  std::string label = "default";
  eval->add_option("--label", label);

  std::vector<std::string> params;
  std::vector<std::string> values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sensitivity sweep over k, K, N or tau");
  sweep_cmd->add_option("--manifest", manifest_path)->required();
  sweep_cmd->add_option("--param", params, "Parameter name (repeatable)")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values, one list per --param");

  std::optional<std::size_t> sample;
  auto* oracle = app.add_subcommand("oracle", "Judge-scored evidence quality study");
  oracle->add_option("--manifest", manifest_path)->required();
  oracle->add_option("--sample", sample, "Random subset size drawn with --seed");

  std::string trace_path;
  auto* trace_cmd = app.add_subcommand("trace", "Trace utilities");
  trace_cmd->require_subcommand(1);
  auto* show = trace_cmd->add_subcommand("show", "Print a trace file");
  show->add_option("path", trace_path)->required();

  int port = 0;
  auto* serve = app.add_subcommand("serve-stub", "Serve the mock script over the wire protocol");
  serve->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (trace_cmd->parsed()) {
      for (const auto& ev : read_trace(trace_path)) {
        std::cout << "#" << ev.seq << " " << ev.stage << " " << shorten(ev.payload.dump(), 160) << "\n";
      }
      return 0;
    }

    const PipelineConfig cfg = build_config(g);
    const PromptSet prompts = PromptSet::from_config(cfg);
    BackendSet backends = make_backends(cfg, g);
    const fs::path out = g.out;

    if (serve->parsed()) {
      if (!backends.scripted_embed) throw ConfigError(Errc::invalid_config, "mock-script", "serve-stub needs a script");
      StubServer server(*backends.planner, *backends.scripted_embed, "127.0.0.1", port);
      std::cout << server.base_url() << std::endl;
      server.wait();
      return 0;
    }

    if (ask->parsed()) {
      const auto options = parse_options(options_text);
      const FrameSequence frames = load_frames(frames_dir, static_cast<std::size_t>(cfg.frame_budget));
      Trace trace;
      const AnswerRecord rec =
          answer_question(frames, question, options, cfg, backends.pipeline(), prompts, trace, question_id);
      fs::create_directories(out);
      const fs::path path = out / (question_id + ".trace.jsonl");
      write_trace(trace.events(), path);
      std::cout << rec.predicted << "\n" << "trace: " << path.string() << "\n";
      if (rec.error) {
        std::cerr << "error: " << *rec.error << "\n";
        return kRuntime;
      }
      return 0;
    }

    const auto manifest = load_manifest(manifest_path);

    if (eval->parsed()) {
      const auto report = evaluate(manifest, cfg, backends.pipeline(), prompts, {out, label});
      print_report(report);
      return 0;
    }

    if (sweep_cmd->parsed()) {
      SweepGrid grid;
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (i < values.size()) {
          grid[params[i]] = parse_values(values[i]);
        } else if (canonical_key(params[i]) == "smooth_kernel") {
          grid[params[i]] = kDefaultKernelGrid;
        } else if (canonical_key(params[i]) == "tau") {
          grid[params[i]] = kDefaultTauGrid;
        } else {
          throw Error(Errc::invalid_argument, "--values required for " + params[i]);
        }
      }
      for (const auto& r : sweep(manifest, cfg, grid, backends.pipeline(), prompts, out)) print_report(r);
      return 0;
    }

    if (oracle->parsed()) {
      const auto report = oracle_assess(manifest, cfg, backends.pipeline(), *backends.judge, prompts, {sample});
      fs::create_directories(out);
      std::ofstream(out / "oracle_report.json") << report.to_json().dump(2) << "\n";
      std::cout << render_oracle_table(report);
      for (const auto& s : report.skipped) std::cerr << "skipped " << s << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  } catch (const Error& e) {
    const bool usage = e.code() == Errc::invalid_argument;
    std::cerr << (usage ? "usage error: " : "error: ") << to_string(e.code()) << ": " << e.what() << "\n";
    return usage ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
