#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace examforge {

enum class ExamLevel : std::uint8_t { P1, P2, P3 };

std::string_view to_string(ExamLevel level);
/// Accepts "P1", "P2", "P3" (case-insensitive). Throws std::invalid_argument.
ExamLevel parse_exam_level(std::string_view s);

inline constexpr int kChoiceCount = 4;

struct Choice {
  int label = 1;  // 1..4
  std::string text;

  bool operator==(const Choice&) const = default;
};

struct ExamQuestion {
  std::string id;
  std::string stem;
  std::array<Choice, kChoiceCount> choices;
  int answer_key = 1;
  std::optional<std::string> module_tag;
  ExamLevel level = ExamLevel::P1;

  const Choice& choice(int label) const { return choices.at(static_cast<std::size_t>(label - 1)); }
  const std::string& correct_text() const { return choice(answer_key).text; }
  bool operator==(const ExamQuestion&) const = default;
};

/// Pass iff the overall fraction and every listed module fraction reach
/// their thresholds.
struct PassingRule {
  double overall_threshold = 0.70;
  std::map<std::string, double> module_thresholds;

  bool operator==(const PassingRule&) const = default;
};

struct Exam {
  ExamLevel level = ExamLevel::P1;
  std::string title;
  std::vector<ExamQuestion> questions;
  PassingRule passing_rule;

  const ExamQuestion* find(std::string_view id) const;
  bool operator==(const Exam&) const = default;
};

/// Bijection on labels {1,2,3,4}: image(old_label) is the new label.
class ChoicePermutation {
 public:
  /// Identity.
  ChoicePermutation();
  /// `images[i]` is the new label of old label i+1. Throws
  /// std::invalid_argument unless it is a permutation of 1..4.
  explicit ChoicePermutation(std::array<int, kChoiceCount> images);

  /// The permutation with the given lexicographic rank among all 24 (0 is
  /// the identity).
  static ChoicePermutation from_rank(int rank);
  static constexpr int kCount = 24;

  int image(int old_label) const;
  int rank() const;
  ChoicePermutation inverse() const;
  bool is_identity() const;
  const std::array<int, kChoiceCount>& images() const { return images_; }
  bool operator==(const ChoicePermutation&) const = default;

 private:
  std::array<int, kChoiceCount> images_;
};

/// Name of the generator used for choice shuffles; recorded in output
/// metadata so datasets can be regenerated.
inline constexpr std::string_view kShufflePrng = "mt19937_64/rank24";

/// Relabels choices: the text at old label L moves to label perm.image(L).
ExamQuestion apply_permutation(const ExamQuestion& q, const ChoicePermutation& perm);

/// Uniform permutation of the four choices drawn from a generator seeded
/// with `seed` only. Deterministic across platforms.
std::pair<ExamQuestion, ChoicePermutation> shuffle_choices(const ExamQuestion& q, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Validation and loading
// ---------------------------------------------------------------------------

enum class ExamErrorKind : std::uint8_t {
  DuplicateQuestionId,
  WrongChoiceCount,
  InvalidAnswerKey,
  SchemaViolation,
  UnsatisfiableModuleThreshold,
};

std::string_view to_string(ExamErrorKind kind);

struct ExamViolation {
  ExamErrorKind kind;
  std::string question_id;  // or module tag for UnsatisfiableModuleThreshold
  std::string detail;

  bool operator==(const ExamViolation&) const = default;
};

class ExamError : public std::runtime_error {
 public:
  explicit ExamError(ExamViolation v);
  const ExamViolation& violation() const { return violation_; }
  ExamErrorKind kind() const { return violation_.kind; }

 private:
  ExamViolation violation_;
};

/// Every invariant violation in document order; empty iff the exam is valid.
std::vector<ExamViolation> validate_exam(const Exam& exam);

/// Parses the exam JSON schema. Structural violations throw ExamError; an
/// unsatisfiable module threshold is left for validate_exam to report.
Exam exam_from_json(const nlohmann::json& j);
nlohmann::ordered_json exam_to_json(const Exam& exam);

Exam load_exam(const std::filesystem::path& path);
void save_exam(const Exam& exam, const std::filesystem::path& path);

}  // namespace examforge
