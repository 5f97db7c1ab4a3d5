#include "evflow/prompts.hpp"

#include <fstream>
#include <iterator>

#include "evflow/error.hpp"
#include "prompt_templates.hpp"

namespace evflow {

PromptSet PromptSet::defaults() {
  return {detail::kPlannerTemplate,   detail::kRefinementTemplate,   detail::kArbitrationTemplate,
          detail::kSynthesisTemplate, detail::kOracleSystemTemplate, detail::kOracleUserTemplate};
}

namespace {

void override_from(std::string& slot, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read prompt template " + path);
  slot.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

PromptSet PromptSet::from_config(const PipelineConfig& cfg) {
  PromptSet p = defaults();
  override_from(p.planner, cfg.planner_prompt);
  override_from(p.refinement, cfg.refinement_prompt);
  override_from(p.arbitration, cfg.arbitration_prompt);
  override_from(p.synthesis, cfg.synthesis_prompt);
  override_from(p.oracle_system, cfg.oracle_system_prompt);
  override_from(p.oracle_user, cfg.oracle_user_prompt);
  return p;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    if (tmpl[i] == '<' || tmpl[i] == '{') {
      for (const auto& [key, value] : values) {
        if (tmpl.substr(i, key.size()) == key) {
          out += value;
          i += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(tmpl[i++]);
  }
  return out;
}

std::string render_oracle_user(std::string_view tmpl, const std::string& query, const std::string& context_note) {
  std::string body;
  if (context_note.empty()) {
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
      auto nl = tmpl.find('\n', pos);
      const auto line = tmpl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      if (line.find("{Context_Note}") == std::string_view::npos) {
        body += line;
        if (nl != std::string_view::npos) body += '\n';
      }
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
  } else {
    body = tmpl;
  }
  return fill_template(body, {{"{q_txt}", query}, {"{Context_Note}", context_note}});
}

std::string with_reminder(const std::string& prompt, std::string_view reminder) {
  return prompt + "\n\n" + std::string(reminder);
}

}  // namespace evflow
