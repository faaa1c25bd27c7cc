#include "examforge/exam.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "examforge/random.hpp"

namespace examforge {

std::string_view to_string(ExamLevel level) {
  switch (level) {
    case ExamLevel::P1: return "P1";
    case ExamLevel::P2: return "P2";
    case ExamLevel::P3: return "P3";
  }
  return "P1";
}

ExamLevel parse_exam_level(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "P1") return ExamLevel::P1;
  if (up == "P2") return ExamLevel::P2;
  if (up == "P3") return ExamLevel::P3;
  throw std::invalid_argument("unknown exam level: " + std::string(s));
}

const ExamQuestion* Exam::find(std::string_view id) const {
  for (const auto& q : questions) {
    if (q.id == id) return &q;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Permutations
// ---------------------------------------------------------------------------

ChoicePermutation::ChoicePermutation() : images_{1, 2, 3, 4} {}

ChoicePermutation::ChoicePermutation(std::array<int, kChoiceCount> images) : images_(images) {
  std::array<int, kChoiceCount> sorted = images;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != std::array<int, kChoiceCount>{1, 2, 3, 4})
    throw std::invalid_argument("not a permutation of choice labels 1..4");
}

ChoicePermutation ChoicePermutation::from_rank(int rank) {
  if (rank < 0 || rank >= kCount) throw std::out_of_range("permutation rank out of range");
  std::vector<int> pool{1, 2, 3, 4};
  std::array<int, kChoiceCount> images{};
  int factorial = 6;
  for (int i = 0; i < kChoiceCount; ++i) {
    const int idx = rank / factorial;
    rank %= factorial;
    images[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(idx)];
    pool.erase(pool.begin() + idx);
    if (i < kChoiceCount - 1) factorial /= (kChoiceCount - 1 - i);
  }
  return ChoicePermutation(images);
}

int ChoicePermutation::image(int old_label) const {
  if (old_label < 1 || old_label > kChoiceCount) throw std::out_of_range("choice label out of range");
  return images_[static_cast<std::size_t>(old_label - 1)];
}

int ChoicePermutation::rank() const {
  int r = 0;
  int factorial = 6;
  std::vector<int> pool{1, 2, 3, 4};
  for (int i = 0; i < kChoiceCount; ++i) {
    auto it = std::find(pool.begin(), pool.end(), images_[static_cast<std::size_t>(i)]);
    r += static_cast<int>(it - pool.begin()) * factorial;
    pool.erase(it);
    if (i < kChoiceCount - 1) factorial /= (kChoiceCount - 1 - i);
  }
  return r;
}

ChoicePermutation ChoicePermutation::inverse() const {
  std::array<int, kChoiceCount> inv{};
  for (int old = 1; old <= kChoiceCount; ++old) inv[static_cast<std::size_t>(image(old) - 1)] = old;
  return ChoicePermutation(inv);
}

bool ChoicePermutation::is_identity() const { return images_ == std::array<int, kChoiceCount>{1, 2, 3, 4}; }

ExamQuestion apply_permutation(const ExamQuestion& q, const ChoicePermutation& perm) {
  ExamQuestion out = q;
  for (int old = 1; old <= kChoiceCount; ++old) {
    const int now = perm.image(old);
    out.choices[static_cast<std::size_t>(now - 1)] = Choice{now, q.choice(old).text};
  }
  out.answer_key = perm.image(q.answer_key);
  return out;
}

std::pair<ExamQuestion, ChoicePermutation> shuffle_choices(const ExamQuestion& q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto perm = ChoicePermutation::from_rank(static_cast<int>(uniform_below(rng, ChoicePermutation::kCount)));
  return {apply_permutation(q, perm), perm};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::string_view to_string(ExamErrorKind kind) {
  switch (kind) {
    case ExamErrorKind::DuplicateQuestionId: return "DuplicateQuestionId";
    case ExamErrorKind::WrongChoiceCount: return "WrongChoiceCount";
    case ExamErrorKind::InvalidAnswerKey: return "InvalidAnswerKey";
    case ExamErrorKind::SchemaViolation: return "SchemaViolation";
    case ExamErrorKind::UnsatisfiableModuleThreshold: return "UnsatisfiableModuleThreshold";
  }
  return "SchemaViolation";
}

namespace {

std::string describe(const ExamViolation& v) {
  std::string s(to_string(v.kind));
  if (!v.question_id.empty()) s += " (" + v.question_id + ")";
  if (!v.detail.empty()) s += ": " + v.detail;
  return s;
}

bool threshold_ok(double t) { return t >= 0.0 && t <= 1.0; }

}  // namespace

ExamError::ExamError(ExamViolation v) : std::runtime_error(describe(v)), violation_(std::move(v)) {}

std::vector<ExamViolation> validate_exam(const Exam& exam) {
  std::vector<ExamViolation> out;
  if (!threshold_ok(exam.passing_rule.overall_threshold))
    out.push_back({ExamErrorKind::SchemaViolation, "", "overall threshold outside [0,1]"});
  for (const auto& [tag, t] : exam.passing_rule.module_thresholds) {
    if (!threshold_ok(t)) out.push_back({ExamErrorKind::SchemaViolation, tag, "module threshold outside [0,1]"});
  }

  std::set<std::string> seen;
  std::set<std::string> tags;
  for (const auto& q : exam.questions) {
    if (!seen.insert(q.id).second) out.push_back({ExamErrorKind::DuplicateQuestionId, q.id, ""});
    if (q.id.empty()) out.push_back({ExamErrorKind::SchemaViolation, q.id, "empty question id"});
    if (q.stem.empty()) out.push_back({ExamErrorKind::SchemaViolation, q.id, "empty stem"});
    for (int i = 0; i < kChoiceCount; ++i) {
      const auto& c = q.choices[static_cast<std::size_t>(i)];
      if (c.label != i + 1) out.push_back({ExamErrorKind::SchemaViolation, q.id, "choice labels must be 1..4 in order"});
      if (c.text.empty()) out.push_back({ExamErrorKind::SchemaViolation, q.id, "empty choice text"});
    }
    if (q.answer_key < 1 || q.answer_key > kChoiceCount)
      out.push_back({ExamErrorKind::InvalidAnswerKey, q.id, "answer_key " + std::to_string(q.answer_key)});
    if (q.level != exam.level) out.push_back({ExamErrorKind::SchemaViolation, q.id, "question level differs from exam level"});
    if (q.module_tag) tags.insert(*q.module_tag);
  }
  for (const auto& [tag, t] : exam.passing_rule.module_thresholds) {
    if (!tags.count(tag))
      out.push_back({ExamErrorKind::UnsatisfiableModuleThreshold, tag, "no question is tagged with this module"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void schema(const std::string& qid, const std::string& detail) {
  throw ExamError({ExamErrorKind::SchemaViolation, qid, detail});
}

std::string require_string(const nlohmann::json& j, const char* key, const std::string& qid) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) schema(qid, std::string("missing string field '") + key + "'");
  return j.at(key).get<std::string>();
}

double require_fraction(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) schema(where, "threshold must be a number");
  const double v = j.get<double>();
  if (!threshold_ok(v)) schema(where, "threshold outside [0,1]");
  return v;
}

}  // namespace

Exam exam_from_json(const nlohmann::json& j) {
  if (!j.is_object()) schema("", "exam must be a JSON object");
  Exam exam;
  try {
    exam.level = parse_exam_level(require_string(j, "level", ""));
  } catch (const std::invalid_argument& e) {
    schema("", e.what());
  }
  exam.title = j.value("title", std::string{});

  if (j.contains("passing_rule")) {
    const auto& rule = j.at("passing_rule");
    if (!rule.is_object()) schema("", "passing_rule must be an object");
    if (rule.contains("overall")) exam.passing_rule.overall_threshold = require_fraction(rule.at("overall"), "overall");
    if (rule.contains("modules")) {
      if (!rule.at("modules").is_object()) schema("", "passing_rule.modules must be an object");
      for (const auto& [tag, t] : rule.at("modules").items()) exam.passing_rule.module_thresholds[tag] = require_fraction(t, tag);
    }
  }

  if (!j.contains("questions") || !j.at("questions").is_array()) schema("", "missing questions array");
  std::set<std::string> seen;
  for (const auto& jq : j.at("questions")) {
    ExamQuestion q;
    if (!jq.is_object()) schema("", "question must be an object");
    q.id = jq.contains("id") && jq.at("id").is_number_integer() ? std::to_string(jq.at("id").get<long long>())
                                                                : require_string(jq, "id", "");
    q.stem = require_string(jq, "stem", q.id);
    q.level = exam.level;
    if (!seen.insert(q.id).second) throw ExamError({ExamErrorKind::DuplicateQuestionId, q.id, ""});

    if (!jq.contains("choices") || !jq.at("choices").is_array()) schema(q.id, "missing choices array");
    const auto& jc = jq.at("choices");
    if (jc.size() != kChoiceCount)
      throw ExamError({ExamErrorKind::WrongChoiceCount, q.id, std::to_string(jc.size()) + " choices"});
    for (int i = 0; i < kChoiceCount; ++i) {
      const auto& c = jc.at(static_cast<std::size_t>(i));
      if (!c.is_string() || c.get<std::string>().empty()) schema(q.id, "choice text must be a non-empty string");
      q.choices[static_cast<std::size_t>(i)] = Choice{i + 1, c.get<std::string>()};
    }

    if (!jq.contains("answer_key") || !jq.at("answer_key").is_number_integer())
      throw ExamError({ExamErrorKind::InvalidAnswerKey, q.id, "answer_key must be an integer"});
    q.answer_key = jq.at("answer_key").get<int>();
    if (q.answer_key < 1 || q.answer_key > kChoiceCount)
      throw ExamError({ExamErrorKind::InvalidAnswerKey, q.id, "answer_key " + std::to_string(q.answer_key)});

    if (jq.contains("module_tag") && !jq.at("module_tag").is_null()) {
      if (!jq.at("module_tag").is_string()) schema(q.id, "module_tag must be a string");
      q.module_tag = jq.at("module_tag").get<std::string>();
    }
    exam.questions.push_back(std::move(q));
  }

  for (const auto& v : validate_exam(exam)) {
    if (v.kind != ExamErrorKind::UnsatisfiableModuleThreshold) throw ExamError(v);
  }
  return exam;
}

nlohmann::ordered_json exam_to_json(const Exam& exam) {
  nlohmann::ordered_json j;
  j["level"] = to_string(exam.level);
  j["title"] = exam.title;
  nlohmann::ordered_json modules = nlohmann::ordered_json::object();
  for (const auto& [tag, t] : exam.passing_rule.module_thresholds) modules[tag] = t;
  j["passing_rule"] = {{"overall", exam.passing_rule.overall_threshold}, {"modules", modules}};
  j["questions"] = nlohmann::ordered_json::array();
  for (const auto& q : exam.questions) {
    nlohmann::ordered_json jq;
    jq["id"] = q.id;
    jq["stem"] = q.stem;
    jq["choices"] = nlohmann::ordered_json::array();
    for (const auto& c : q.choices) jq["choices"].push_back(c.text);
    jq["answer_key"] = q.answer_key;
    if (q.module_tag) jq["module_tag"] = *q.module_tag;
    j["questions"].push_back(std::move(jq));
  }
  return j;
}

Exam load_exam(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open exam file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    schema("", std::string("invalid JSON: ") + e.what());
  }
  return exam_from_json(j);
}

void save_exam(const Exam& exam, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write exam file: " + path.string());
  out << exam_to_json(exam).dump(2, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
}

}  // namespace examforge
