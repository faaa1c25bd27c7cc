#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace examforge {

struct ExamQuestion;

enum class PromptVariantId : std::uint8_t { CoT, ZeroShotBias, ZeroShotMultiLLM };

/// A named system prompt. system_text is the verbatim exam prompt for the id.
struct PromptVariant {
  PromptVariantId id = PromptVariantId::CoT;
  std::string_view system_text;

  bool operator==(const PromptVariant&) const = default;
};

// Thai answer scaffolding. The anchor closes a chain-of-thought answer; the
// zero-shot bias prompt opens with the short form and introduces the reason
// with the reason marker.
inline constexpr std::string_view kAnswerAnchor = "ดังนั้น คำตอบที่ถูกต้องคือ:";
inline constexpr std::string_view kAnswerPhrase = "คำตอบที่ถูกต้องคือ:";
inline constexpr std::string_view kReasonMarker = "เหตุผล:";

inline constexpr std::string_view kCoTSystemPrompt =
    "You are a Certified Thai Investment Consultant (IC) taking a multiple choice exam.\n"
    "Think step-by-step and then finish your answer with \"ดังนั้น คำตอบที่ถูกต้องคือ: \" "
    "followed by the correct choice name (1, 2, 3, or 4).";

// The "\\n" sequences are literal backslash-n characters, exactly as the
// prompt is written.
inline constexpr std::string_view kZeroShotBiasSystemPrompt =
    "You are a Certified Thai Investment Consultant (IC) taking a test to evaluate your knowledge.\n"
    "Multiple choices question along with four possible answers (1, 2, 3, and 4) will be given to you.\n"
    "Your task is to indicate the correct answer and provide the backup reason.\n"
    "Begin your answer with \"คำตอบที่ถูกต้องคือ: \" followed by the correct choice and then "
    "finish your answer with \"\\\\n\\\\nเหตุผล:\\\\n\".";

inline constexpr std::string_view kZeroShotMultiLLMSystemPrompt =
    "You are a Certified Thai Investment Consultant (IC) taking a test to evaluate your knowledge.\n"
    "Multiple choices question along with four possible answers (1, 2, 3, and 4) will be given to you.\n"
    "Your task is to indicate the correct answer and provide the backup reason.";

PromptVariant prompt_variant(PromptVariantId id);
/// CoT, ZeroShotBias, ZeroShotMultiLLM.
std::vector<PromptVariant> all_prompt_variants();

/// "cot", "zero_shot_bias", "zero_shot_multi_llm".
std::string_view to_string(PromptVariantId id);
/// Accepts the names above; throws std::invalid_argument otherwise.
PromptVariantId parse_prompt_variant(std::string_view name);

/// True when `response` carries the answer scaffold the variant asks for:
/// the anchor for CoT, the answer phrase plus reason marker for the bias
/// prompt. The multi-LLM zero-shot prompt prescribes no scaffold.
bool has_scaffold(PromptVariantId id, std::string_view response);

/// "Question: <stem>\n\n1) <c1>\n2) <c2>\n3) <c3>\n4) <c4>"
std::string render_question(const ExamQuestion& q);

struct RenderedPrompt {
  std::string system;
  std::string user;

  bool operator==(const RenderedPrompt&) const = default;
};

/// The variant's system prompt with the question as the user turn.
RenderedPrompt render_exam_prompt(const ExamQuestion& q, const PromptVariant& variant);

}  // namespace examforge
