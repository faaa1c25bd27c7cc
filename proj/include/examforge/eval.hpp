#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "examforge/exam.hpp"
#include "examforge/gateway.hpp"
#include "examforge/prompts.hpp"
#include "json.hpp"

namespace examforge {

enum class ExtractionMethod : std::uint8_t { Anchor, FallbackRegex, None };

std::string_view to_string(ExtractionMethod m);
ExtractionMethod parse_extraction_method(std::string_view s);

struct ExtractedAnswer {
  std::optional<int> label;
  ExtractionMethod method = ExtractionMethod::None;
  std::string raw_span;

  bool operator==(const ExtractedAnswer&) const = default;
};

/// Reads the final choice from a free-form answer. Looks at the last
/// "ดังนั้น คำตอบที่ถูกต้องคือ:" anchor, or the last bare
/// "คำตอบที่ถูกต้องคือ:" when the anchor is absent. After the phrase,
/// whitespace and markdown emphasis are skipped and a single digit 1-4 must
/// follow; a multi-digit number (e.g. "26.4") is not a label. Never throws.
ExtractedAnswer extract_answer(std::string_view text);

struct QuestionResult {
  std::string question_id;
  ExtractedAnswer extracted;
  bool correct = false;
  std::string response_text;
  std::string error;

  bool operator==(const QuestionResult&) const = default;
};

struct ExamReport {
  ExamLevel level = ExamLevel::P1;
  std::string backend_id;
  std::string prompt_variant;
  std::vector<QuestionResult> results;
  std::size_t correct_count = 0;
  double overall_pct = 0.0;
  std::map<std::string, double> module_pct;
  bool passed = false;

  bool operator==(const ExamReport&) const = default;
};

class UnknownQuestionId : public std::runtime_error {
 public:
  explicit UnknownQuestionId(const std::string& id) : std::runtime_error("unknown question id: " + id) {}
};

/// Grades extracted answers against the key. Questions without an entry
/// count as unanswered. A module threshold with no tagged questions cannot
/// be met. Throws UnknownQuestionId for answers to questions not in the exam.
ExamReport score_exam(const Exam& exam, const std::map<std::string, ExtractedAnswer>& answers);

/// One line of the raw-response audit log.
struct AuditEntry {
  std::string question_id;
  std::string backend_id;
  std::string variant;
  std::string request_hash;
  std::string response_text;
  ExtractedAnswer extracted;
  bool correct = false;
  std::string error;
};

struct EvalOptions {
  double temperature = 0.0;
  std::size_t max_output_tokens = 2048;
  std::optional<std::uint64_t> seed = 0;
  /// Upper bound on questions in flight; the gateway applies its own
  /// per-backend limit on top.
  std::size_t parallelism = 4;
};

struct EvalRun {
  ExamReport report;
  std::vector<AuditEntry> audit;
};

/// Prompts the backend with every question, extracts and scores the
/// answers. Gateway failures are recorded per question as unanswered.
EvalRun run_eval(const Exam& exam, Gateway& gateway, const BackendSpec& backend, const PromptVariant& variant,
                 const EvalOptions& options = {});

enum class ReportFormat : std::uint8_t { Table, Csv };

/// Rows are (backend, variant); columns are the P1/P2/P3 percentages with a
/// pass/fail mark. CSV uses CRLF line endings and RFC 4180 quoting.
std::string emit_report(const std::vector<ExamReport>& reports, ReportFormat format);

/// "72%", "33.3%".
std::string format_percent(double fraction);

nlohmann::ordered_json extracted_to_json(const ExtractedAnswer& a);
ExtractedAnswer extracted_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json report_to_json(const ExamReport& r);
ExamReport report_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json audit_to_json(const AuditEntry& e);

}  // namespace examforge
