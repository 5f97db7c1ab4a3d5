#include "evflow/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "evflow/error.hpp"
#include "evflow/ingest.hpp"
#include "evflow/perception.hpp"
#include "evflow/planner.hpp"

namespace evflow {

using nlohmann::json;

json SubqueryOutcome::to_json() const {
  return {{"root_id", root_id},
          {"final_id", final_id},
          {"status", status},
          {"refinements", refinements},
          {"arbitrations", arbitrations}};
}

json AnswerRecord::to_json() const {
  json subs = json::array();
  for (const auto& s : subqueries) subs.push_back(s.to_json());
  return {{"question_id", question_id},
          {"predicted", predicted},
          {"raw_text", raw_text},
          {"error", error ? json(*error) : json(nullptr)},
          {"subqueries", subs},
          {"chat_calls", chat_calls},
          {"chat_calls_by_purpose", chat_calls_by_purpose},
          {"embed_calls", embed_calls},
          {"config", config},
          {"board", board.to_json()}};
}

std::string format_question(const std::string& question, const std::vector<Option>& options) {
  std::string out = question;
  for (const auto& o : options) out += "\n" + o.letter + ". " + o.text;
  return out;
}

std::vector<ChatMessage> synthesis_messages(const std::string& question, const std::vector<Option>& options,
                                            const Blackboard& board, const FrameSequence& frames,
                                            const PromptSet& prompts, const std::vector<Raster>& extra_images) {
  const std::map<std::string, std::string> values{{"<QUESTION>", format_question(question, options)},
                                                  {"<BLACKBOARD>", board.render()}};
  const std::string_view tmpl = prompts.synthesis;
  const auto cut = tmpl.find("<VIDEO>");
  const std::string before = fill_template(tmpl.substr(0, cut), values);
  const std::string after =
      cut == std::string_view::npos ? std::string() : fill_template(tmpl.substr(cut + 7), values);

  ChatMessage msg{Role::user, {}};
  if (!before.empty()) msg.parts.emplace_back(TextPart{before});
  for (const auto& f : frames.frames()) msg.parts.emplace_back(ImagePart{f.raster});
  for (const auto& img : extra_images) msg.parts.emplace_back(ImagePart{img});
  if (!after.empty()) msg.parts.emplace_back(TextPart{after});
  return {std::move(msg)};
}

namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::vector<std::string> content_tokens(std::string_view text) {
  static const std::set<std::string> stop{"a",   "an",   "the",  "is",   "are",  "was",  "were", "of",
                                          "in",  "on",   "at",   "to",   "and",  "or",   "it",   "this",
                                          "that", "with", "for", "by",   "be",   "as",   "there"};
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stop.contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::optional<std::string> first_in(const std::string& text, const std::regex& re, const std::set<std::string>& letters,
                                    bool require_no_lower_follow = false) {
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    const std::string letter = upper((*it)[1].str());
    if (!letters.contains(letter)) continue;
    if (require_no_lower_follow) {
      auto pos = static_cast<std::size_t>(it->position(1) + 1);
      while (pos < text.size() && text[pos] == ' ') ++pos;
      if (pos < text.size() && std::islower(static_cast<unsigned char>(text[pos]))) continue;
    }
    return letter;
  }
  return std::nullopt;
}

}  // namespace

std::string parse_answer_letter(std::string_view reply, const std::vector<Option>& options) {
  std::set<std::string> letters;
  for (const auto& o : options) letters.insert(upper(o.letter));
  const std::string text = trim(reply);
  if (text.empty()) return std::string(kUnparsed);

  static const std::regex lone(R"re(^[\s("'*\[]*([A-Za-z])[\s)"'*\].:]*$)re");
  static const std::regex cue(R"((?:[Aa]nswer|[Oo]ption|[Cc]hoice)(?:\s+is)?\s*[:\-]?\s*\(?([A-Z])(?![A-Za-z]))");
  static const std::regex paren(R"(\(([A-Za-z])\))");
  static const std::regex marked(R"((?:^|[^A-Za-z])([A-Z])[.):](?![A-Za-z]))");
  static const std::regex bare(R"((?:^|[^A-Za-z])([A-Z])(?![A-Za-z]))");

  if (auto m = first_in(text, lone, letters)) return *m;
  if (auto m = first_in(text, cue, letters)) return *m;
  if (auto m = first_in(text, paren, letters)) return *m;
  if (auto m = first_in(text, marked, letters)) return *m;
  if (auto m = first_in(text, bare, letters, true)) return *m;

  const auto reply_tokens = content_tokens(text);
  const std::set<std::string> reply_set(reply_tokens.begin(), reply_tokens.end());
  std::size_t best = 0;
  std::string best_letter;
  bool tie = false;
  for (const auto& o : options) {
    std::set<std::string> opt;
    for (auto& t : content_tokens(o.text)) opt.insert(t);
    std::size_t overlap = 0;
    for (const auto& t : opt) overlap += reply_set.contains(t) ? 1 : 0;
    if (overlap > best) {
      best = overlap;
      best_letter = upper(o.letter);
      tie = false;
    } else if (overlap == best && overlap > 0) {
      tie = true;
    }
  }
  if (best == 0 || tie) return std::string(kUnparsed);
  return best_letter;
}

std::pair<std::string, std::string> synthesize_answer(const std::string& question, const std::vector<Option>& options,
                                                      const Blackboard& board, const FrameSequence& frames,
                                                      const PipelineConfig& cfg, ChatClient& chat,
                                                      const PromptSet& prompts, Trace* trace,
                                                      const std::vector<Raster>& extra_images) {
  std::vector<Frame> picked;
  for (std::size_t pos : uniform_positions(frames.size(), static_cast<std::size_t>(cfg.frame_budget))) {
    picked.push_back(frames[pos]);
  }
  const FrameSequence sampled(std::move(picked), frames.source_id(), frames.meta());
  const auto messages = synthesis_messages(question, options, board, sampled, prompts, extra_images);
  const std::string raw = chat.chat(messages, {cfg.temperature, cfg.synthesis_max_tokens, "synthesis"}).text;
  const std::string letter = parse_answer_letter(raw, options);
  trace_emit(trace, "synthesis", {{"raw_text", raw},
                                  {"predicted", letter},
                                  {"blackboard", board.render()},
                                  {"facts", board.facts().size()},
                                  {"frames", sampled.size()},
                                  {"extra_images", extra_images.size()}});
  return {letter, raw};
}

namespace {

void check_options(const std::vector<Option>& options) {
  if (options.empty()) throw Error(Errc::invalid_argument, "at least one option is required");
  std::set<std::string> seen;
  for (const auto& o : options) {
    if (trim(o.letter).empty()) throw Error(Errc::invalid_argument, "option letter is empty");
    if (!seen.insert(upper(o.letter)).second) {
      throw Error(Errc::invalid_argument, "duplicate option letter " + o.letter);
    }
  }
}

struct LoopState {
  Blackboard board;
  std::vector<Raster> accepted_crops;
};

void record_accept(LoopState& st, Blackboard next, const Decision& d, const Evidence& e, bool unverified,
                   Trace& trace) {
  st.board = std::move(next);
  st.accepted_crops.push_back(e.crop);
  json payload{{"subquery_id", e.subquery_id},
               {"fact", std::get<Accept>(d.value).fact.to_json()},
               {"board_size", st.board.facts().size()}};
  if (unverified) payload["unverified"] = true;
  trace.emit("board.update", std::move(payload));
}

}  // namespace

AnswerRecord answer_question(const FrameSequence& frames, const std::string& question,
                             const std::vector<Option>& options, const PipelineConfig& cfg, Backends backends,
                             const PromptSet& prompts, Trace& trace, const std::string& question_id) {
  check_options(options);
  AnswerRecord rec;
  rec.question_id = question_id;
  rec.config = config_to_json(cfg);

  CountingChat chat(backends.chat);
  CountingEmbed embed(backends.embed);
  LoopState st;
  const bool verify = !cfg.has(Ablation::no_eba);

  try {
    const ReasoningPlan plan = decompose(question, chat, cfg, prompts, &trace);
    for (const SubQuery& root : plan.subqueries) {
      SubqueryOutcome out{root.id, root.id, "dropped", 0, 0};
      SubQuery sq = root;
      ExhaustedSet exhausted;
      while (true) {
        const int budget_left = cfg.max_refinements - sq.generation;
        std::optional<RefinementSignal> refine;
        std::string drop_reason = "budget exhausted";
        bool accepted = false;

        if (cfg.has(Ablation::no_hap)) {
          for (const Evidence& e : uniform_frame_evidence(frames, sq, static_cast<std::size_t>(cfg.top_k))) {
            const auto r = arbitrate(e, sq, st.board, chat, cfg, prompts, &trace);
            ++out.arbitrations;
            auto [next, d] = verify ? apply_arbitration(st.board, r, e, sq, cfg.tau, budget_left)
                                    : accumulate_unverified(st.board, r, e, sq);
            if (d.is_accept()) {
              record_accept(st, std::move(next), d, e, !verify, trace);
              accepted = true;
            } else if (d.is_refine() && !refine) {
              refine = std::get<Refine>(d.value).signal;
            }
          }
        } else {
          std::optional<Evidence> e;
          try {
            e = scout(frames, sq, cfg, embed, exhausted, &trace);
          } catch (const Error& err) {
            if (err.code() != Errc::all_candidates_exhausted) throw;
            drop_reason = "all candidates exhausted";
          }
          if (e) {
            exhausted = e->exhausted;
            const auto r = arbitrate(*e, sq, st.board, chat, cfg, prompts, &trace);
            ++out.arbitrations;
            auto [next, d] = verify ? apply_arbitration(st.board, r, *e, sq, cfg.tau, budget_left)
                                    : accumulate_unverified(st.board, r, *e, sq);
            if (d.is_accept()) {
              record_accept(st, std::move(next), d, *e, !verify, trace);
              accepted = true;
            } else if (d.is_refine()) {
              refine = std::get<Refine>(d.value).signal;
            }
          }
        }

        if (accepted) {
          out.status = "accepted";
          break;
        }
        if (refine) {
          sq = refine_subquery(sq, *refine, chat, cfg, prompts, &trace);
          ++out.refinements;
          out.final_id = sq.id;
          continue;
        }
        trace.emit("board.drop", {{"subquery_id", sq.id}, {"root_id", root.id}, {"reason", drop_reason}});
        break;
      }
      rec.subqueries.push_back(out);
    }

    std::vector<Raster> extra;
    if (cfg.include_evidence_crops) extra = st.accepted_crops;
    auto [letter, raw] = synthesize_answer(question, options, st.board, frames, cfg, chat, prompts, &trace, extra);
    rec.predicted = letter;
    rec.raw_text = raw;
  } catch (const Error& e) {
    rec.predicted = std::string(kUnparsed);
    rec.error = std::string(to_string(e.code())) + ": " + e.what();
  } catch (const std::exception& e) {
    rec.predicted = std::string(kUnparsed);
    rec.error = std::string("Internal: ") + e.what();
  }

  rec.board = st.board;
  rec.chat_calls = chat.total();
  rec.chat_calls_by_purpose = chat.by_purpose();
  rec.embed_calls = embed.total();
  json payload{{"question_id", question_id}, {"predicted", rec.predicted}, {"chat_calls", rec.chat_calls},
               {"embed_calls", rec.embed_calls}};
  if (rec.error) payload["error"] = *rec.error;
  trace.emit("answer", std::move(payload));
  return rec;
}

}  // namespace evflow
