#include <fstream>

#include <gtest/gtest.h>

#include "evflow/error.hpp"
#include "evflow/json_extract.hpp"
#include "evflow/mock.hpp"
#include "evflow/planner.hpp"
#include "evflow/prompts.hpp"
#include "support.hpp"

using namespace evflow;
using nlohmann::json;

namespace {

std::string plan_of(int n) {
  json arr = json::array();
  for (int i = 0; i < n; ++i) {
    arr.push_back({{"q_text", "question " + std::to_string(i)}, {"q_vis", "thing " + std::to_string(i)}});
  }
  return arr.dump();
}

}  // namespace

TEST(JsonExtract, RecoversListsFromNoisyReplies) {
  // Handwritten corpus of the shapes planners actually produce.
  const std::vector<std::string> noisy{
      "```json\n[{\"q_text\":\"a\",\"q_vis\":\"b\"}]\n```",
      "Sure! [{\"q_text\":\"a\",\"q_vis\":\"b\"}] hope that helps",
      "```\n[{\"q_text\":\"a\",\"q_vis\":\"b\"}]\n```",
      "[{\"q_text\":\"a\",\"q_vis\":\"b\"},]",
      "Here is the plan:\n\n[\n  {\"q_text\": \"a\", \"q_vis\": \"b\"}\n]\n",
      "[{\"q_text\":\"a [x]\",\"q_vis\":\"b\"}] trailing [1,2]",
      "Plan (JSON): [{\"q_text\": \"a\", \"q_vis\": \"b\",}]",
      "```JSON\n[{\"q_text\":\"a\",\"q_vis\":\"b\"}]```",
      "Thinking about it... the answer: [{\"q_text\":\"a\",\"q_vis\":\"b\"}]",
      "[{\"q_text\":\"a\",\"q_vis\":\"b\"}]\n\nLet me know if you need more.",
      "  \n[{\"q_text\":\"a\",\"q_vis\":\"b\"}]  ",
      "Output:\n```json\n[\n{\"q_text\":\"a\",\"q_vis\":\"b\"}\n]\n```\nDone.",
      "[ {\"q_text\":\"a\", \"q_vis\":\"b\"} ] ",
      "[{\"q_text\":\"a \\\"quoted\\\" ]\",\"q_vis\":\"b\"}]",
      "Two steps: ```json [{\"q_text\":\"a\",\"q_vis\":\"b\"}] ```",
      "[\n{\"q_text\":\"a\",\n\"q_vis\":\"b\"\n},\n]",
      "I'd split it like so [{\"q_text\":\"a\",\"q_vis\":\"b\"}].",
      "{note} then [{\"q_text\":\"a\",\"q_vis\":\"b\"}]",
      "[{\"q_vis\":\"b\",\"q_text\":\"a\"}]",
      "Result\r\n[{\"q_text\":\"a\",\"q_vis\":\"b\"}]\r\n"};
  for (const auto& text : noisy) {
    const auto r = parse_plan_json(text);
    ASSERT_EQ(r.items.size(), 1u) << text;
    EXPECT_EQ(r.items[0].q_vis, "b") << text;
    EXPECT_EQ(r.items[0].q_text.substr(0, 1), "a") << text;
  }
}

TEST(JsonExtract, ObjectsAndAbsence) {
  auto obj = extract_json_object("The result is {\"confidence\": 0.5, \"note\": \"}\"} ok");
  ASSERT_TRUE(obj);
  EXPECT_EQ((*obj)["note"], "}");
  EXPECT_FALSE(extract_json_object("nothing here"));
  EXPECT_FALSE(extract_json_array("no json here"));
  EXPECT_FALSE(extract_json_array("[unclosed"));
}

TEST(PlanParse, AbsentListIsAParseError) {
  try {
    parse_plan_json("no json here");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), Errc::plan_parse);
  }
}

TEST(PlanParse, IncompleteElementsAreDroppedWithWarnings) {
  const auto r = parse_plan_json(R"([{"q_text":"a","q_vis":"b"},{"q_text":"only text"},{"q_vis":""},7])");
  EXPECT_EQ(r.items.size(), 1u);
  EXPECT_EQ(r.warnings.size(), 3u);
}

TEST(ErrorTypes, LabelsRoundTrip) {
  for (auto t : {ErrorType::object_occlusion, ErrorType::temporal_mismatch, ErrorType::low_confidence,
                 ErrorType::contradictory_evidence}) {
    EXPECT_EQ(parse_error_type(error_label(t)), t);
  }
  EXPECT_EQ(parse_error_type("temporal_mismatch"), ErrorType::temporal_mismatch);
  EXPECT_FALSE(parse_error_type("gremlins"));
}

TEST(Decompose, SingleItemPlan) {
  ScriptedChat chat({ChatRule::reply("", R"([{"q_text":"Is a traffic light visible?","q_vis":"traffic light"}])")});
  Trace trace;
  const auto plan = decompose("Why did the car stop?", chat, PipelineConfig{}, PromptSet::defaults(), &trace);
  ASSERT_EQ(plan.subqueries.size(), 1u);
  EXPECT_EQ(plan.subqueries[0].id, "sq1");
  EXPECT_EQ(plan.subqueries[0].q_vis, "traffic light");
  EXPECT_EQ(plan.subqueries[0].generation, 0);
  EXPECT_EQ(trace.count("plan"), 1u);
  EXPECT_NE(chat.transcript()[0].find("Why did the car stop?"), std::string::npos);
  EXPECT_EQ(chat.transcript()[0].find("<QUESTION>"), std::string::npos);
}

TEST(Decompose, PassthroughWithoutPlannerCall) {
  ScriptedChat chat({});
  PipelineConfig cfg;
  cfg.ablations = {Ablation::no_hdd};
  Trace trace;
  const auto plan = decompose("Why did X?", chat, cfg, PromptSet::defaults(), &trace);
  ASSERT_EQ(plan.subqueries.size(), 1u);
  EXPECT_EQ(plan.subqueries[0].q_text, "Why did X?");
  EXPECT_EQ(plan.subqueries[0].q_vis, "Why did X?");
  EXPECT_EQ(chat.calls(), 0u);
  EXPECT_EQ(trace.events().at(0).payload["source"], "passthrough");
}

TEST(Decompose, OversizedPlanIsTruncatedAndTraced) {
  ScriptedChat chat({ChatRule::reply("", plan_of(9))});
  Trace trace;
  const auto plan = decompose("q", chat, PipelineConfig{}, PromptSet::defaults(), &trace);
  ASSERT_EQ(plan.subqueries.size(), 6u);
  EXPECT_EQ(plan.subqueries[5].q_text, "question 5");
  EXPECT_EQ(trace.events().at(0).payload["truncated_from"], 9);
  EXPECT_EQ(trace.count("warning"), 1u);
}

TEST(Decompose, OneRepairRepromptThenSuccess) {
  ScriptedChat chat({ChatRule::sequence({""}, {"I cannot comply", plan_of(2)})});
  Trace trace;
  const auto plan = decompose("q", chat, PipelineConfig{}, PromptSet::defaults(), &trace);
  EXPECT_EQ(plan.subqueries.size(), 2u);
  ASSERT_EQ(chat.calls(), 2u);
  EXPECT_NE(chat.transcript()[1].find(std::string(kJsonListReminder)), std::string::npos);
  EXPECT_EQ(trace.events().at(0).payload["kind"], "parse_repair");
}

TEST(Decompose, SecondFailureIsFatal) {
  ScriptedChat chat({ChatRule::reply("", "still prose")});
  Trace trace;
  try {
    decompose("q", chat, PipelineConfig{}, PromptSet::defaults(), &trace);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), Errc::plan_parse);
    EXPECT_EQ(e.raw(), "still prose");
  }
  EXPECT_EQ(chat.calls(), 2u);
  EXPECT_EQ(trace.count("warning"), 2u);
}

TEST(Decompose, EmptyPlanIsAnError) {
  ScriptedChat chat({ChatRule::reply("", "[]")});
  try {
    decompose("q", chat, PipelineConfig{}, PromptSet::defaults());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_plan);
  }
}

TEST(Decompose, PlanLengthStaysWithinBounds) {
  testkit::Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    PipelineConfig cfg;
    cfg.max_subqueries = rng.integer(1, 8);
    const int n = rng.integer(1, 12);
    ScriptedChat chat({ChatRule::reply("", plan_of(n))});
    const auto plan = decompose("q", chat, cfg, PromptSet::defaults());
    EXPECT_EQ(plan.subqueries.size(), static_cast<std::size_t>(std::min(n, cfg.max_subqueries)));
  }
}

TEST(Refine, ProducesNextGenerationWithLineage) {
  ScriptedChat chat(
      {ChatRule::reply("", R"({"q_text":"Did the car slow before the stop?","q_vis":"car slowing before stop"})")});
  const SubQuery sq{"sq2", "Did the car stop?", "car", 0, std::nullopt};
  Trace trace;
  const auto r = refine_subquery(sq, {"sq2", ErrorType::temporal_mismatch, ""}, chat, PipelineConfig{},
                                 PromptSet::defaults(), &trace);
  EXPECT_EQ(r.generation, 1);
  EXPECT_EQ(r.parent_id, "sq2");
  EXPECT_EQ(r.id, "sq2.r1");
  EXPECT_EQ(r.q_vis, "car slowing before stop");
  EXPECT_EQ(trace.count("refine"), 1u);
  EXPECT_NE(chat.transcript()[0].find("Temporal Mismatch"), std::string::npos);

  const auto r2 = refine_subquery(r, {"sq2.r1", ErrorType::low_confidence, ""}, chat, PipelineConfig{},
                                  PromptSet::defaults());
  EXPECT_EQ(r2.id, "sq2.r2");
  EXPECT_EQ(r2.parent_id, "sq2.r1");
}

TEST(Refine, BudgetIsEnforced) {
  ScriptedChat chat({});
  PipelineConfig cfg;
  const SubQuery sq{"sq1.r2", "q", "v", cfg.max_refinements, "sq1.r1"};
  try {
    refine_subquery(sq, {"sq1.r2", ErrorType::low_confidence, ""}, chat, cfg, PromptSet::defaults());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::refinement_budget_exhausted);
  }
  EXPECT_EQ(chat.calls(), 0u);
}

TEST(Refine, PromptNamesTheErrorType) {
  const SubQuery sq{"sq1", "Is it red?", "red light", 0, std::nullopt};
  const auto text = refinement_prompt(PromptSet::defaults(), sq, ErrorType::contradictory_evidence);
  EXPECT_NE(text.find("Contradictory Evidence"), std::string::npos);
  EXPECT_NE(text.find("Is it red?"), std::string::npos);
  EXPECT_NE(text.find("red light"), std::string::npos);
}

TEST(Prompts, DefaultsCarryTheirPlaceholders) {
  const auto p = PromptSet::defaults();
  EXPECT_NE(p.planner.find("<QUESTION>"), std::string::npos);
  EXPECT_NE(p.refinement.find("<error_type>"), std::string::npos);
  EXPECT_NE(p.arbitration.find("<BLACKBOARD>"), std::string::npos);
  EXPECT_NE(p.synthesis.find("<VIDEO>"), std::string::npos);
  EXPECT_NE(p.synthesis.find("Only select the best option."), std::string::npos);
  EXPECT_NE(p.oracle_user.find("{q_txt}"), std::string::npos);
  EXPECT_FALSE(p.oracle_system.empty());
}

TEST(Prompts, SubstitutionIsSinglePass) {
  EXPECT_EQ(fill_template("<a> and <b>", {{"<a>", "<b>"}, {"<b>", "B"}}), "<b> and B");
  EXPECT_EQ(fill_template("no markers", {{"<a>", "x"}}), "no markers");
}

TEST(Prompts, OracleContextLineIsDroppedWhenEmpty) {
  const auto p = PromptSet::defaults();
  const auto base = render_oracle_user(p.oracle_user, "Why?", "");
  EXPECT_EQ(base.find("Image Context"), std::string::npos);
  EXPECT_NE(base.find("Query: Why?"), std::string::npos);
  const auto hap = render_oracle_user(p.oracle_user, "Why?", std::string(kHapContextNote));
  EXPECT_NE(hap.find(std::string(kHapContextNote)), std::string::npos);
}

TEST(Prompts, OverrideFilesReplaceDefaults) {
  const auto dir = testkit::scratch_dir("prompt_override");
  std::ofstream(dir / "planner.txt") << "Custom planner for <QUESTION>";
  PipelineConfig cfg;
  cfg.planner_prompt = (dir / "planner.txt").string();
  const auto p = PromptSet::from_config(cfg);
  EXPECT_EQ(p.planner, "Custom planner for <QUESTION>");
  EXPECT_EQ(p.synthesis, PromptSet::defaults().synthesis);
  cfg.planner_prompt = (dir / "missing.txt").string();
  EXPECT_THROW(PromptSet::from_config(cfg), Error);
}
