#include "examforge/prompts.hpp"

#include <stdexcept>

#include "examforge/exam.hpp"

namespace examforge {

PromptVariant prompt_variant(PromptVariantId id) {
  switch (id) {
    case PromptVariantId::CoT: return {id, kCoTSystemPrompt};
    case PromptVariantId::ZeroShotBias: return {id, kZeroShotBiasSystemPrompt};
    case PromptVariantId::ZeroShotMultiLLM: return {id, kZeroShotMultiLLMSystemPrompt};
  }
  throw std::invalid_argument("unknown prompt variant");
}

std::vector<PromptVariant> all_prompt_variants() {
  return {prompt_variant(PromptVariantId::CoT), prompt_variant(PromptVariantId::ZeroShotBias),
          prompt_variant(PromptVariantId::ZeroShotMultiLLM)};
}

std::string_view to_string(PromptVariantId id) {
  switch (id) {
    case PromptVariantId::CoT: return "cot";
    case PromptVariantId::ZeroShotBias: return "zero_shot_bias";
    case PromptVariantId::ZeroShotMultiLLM: return "zero_shot_multi_llm";
  }
  return "cot";
}

PromptVariantId parse_prompt_variant(std::string_view name) {
  if (name == "cot" || name == "CoT") return PromptVariantId::CoT;
  if (name == "zero_shot_bias" || name == "ZeroShotBias") return PromptVariantId::ZeroShotBias;
  if (name == "zero_shot_multi_llm" || name == "ZeroShotMultiLLM") return PromptVariantId::ZeroShotMultiLLM;
  throw std::invalid_argument("unknown prompt variant: " + std::string(name));
}

bool has_scaffold(PromptVariantId id, std::string_view response) {
  switch (id) {
    case PromptVariantId::CoT:
      return response.find(kAnswerAnchor) != std::string_view::npos;
    case PromptVariantId::ZeroShotBias:
      return response.find(kAnswerPhrase) != std::string_view::npos &&
             response.find(kReasonMarker) != std::string_view::npos;
    case PromptVariantId::ZeroShotMultiLLM:
      return true;
  }
  return false;
}

std::string render_question(const ExamQuestion& q) {
  std::string out = "Question: ";
  out += q.stem;
  out += "\n";
  for (const auto& c : q.choices) {
    out += "\n";
    out += std::to_string(c.label);
    out += ") ";
    out += c.text;
  }
  return out;
}

RenderedPrompt render_exam_prompt(const ExamQuestion& q, const PromptVariant& variant) {
  return {std::string(variant.system_text), render_question(q)};
}

}  // namespace examforge
