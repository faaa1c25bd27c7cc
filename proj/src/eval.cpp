#include "examforge/eval.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

namespace examforge {

std::string_view to_string(ExtractionMethod m) {
  switch (m) {
    case ExtractionMethod::Anchor: return "anchor";
    case ExtractionMethod::FallbackRegex: return "fallback_regex";
    case ExtractionMethod::None: return "none";
  }
  return "none";
}

ExtractionMethod parse_extraction_method(std::string_view s) {
  if (s == "anchor") return ExtractionMethod::Anchor;
  if (s == "fallback_regex") return ExtractionMethod::FallbackRegex;
  if (s == "none") return ExtractionMethod::None;
  throw std::invalid_argument("unknown extraction method: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

namespace {

bool is_skippable(std::string_view text, std::size_t pos, std::size_t& width) {
  const char c = text[pos];
  width = 1;
  switch (c) {
    case ' ': case '\t': case '\n': case '\r': case '*': case '_': case ':': case '`': case '(': case '[': case '"':
    case '\'':
      return true;
    default:
      break;
  }
  // U+00A0 no-break space.
  if (static_cast<unsigned char>(c) == 0xC2 && pos + 1 < text.size() && static_cast<unsigned char>(text[pos + 1]) == 0xA0) {
    width = 2;
    return true;
  }
  return false;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::optional<std::size_t> label_position(std::string_view text, std::size_t pos) {
  std::size_t width = 1;
  while (pos < text.size() && is_skippable(text, pos, width)) pos += width;
  if (pos >= text.size() || text[pos] < '1' || text[pos] > '4') return std::nullopt;
  const std::size_t next = pos + 1;
  if (next < text.size()) {
    if (is_digit(text[next])) return std::nullopt;
    if ((text[next] == '.' || text[next] == ',') && next + 1 < text.size() && is_digit(text[next + 1])) return std::nullopt;
  }
  return pos;
}

}  // namespace

ExtractedAnswer extract_answer(std::string_view text) {
  ExtractedAnswer out;
  std::size_t start = text.rfind(kAnswerAnchor);
  std::size_t phrase_len = kAnswerAnchor.size();
  ExtractionMethod method = ExtractionMethod::Anchor;
  if (start == std::string_view::npos) {
    start = text.rfind(kAnswerPhrase);
    phrase_len = kAnswerPhrase.size();
    method = ExtractionMethod::FallbackRegex;
  }
  if (start == std::string_view::npos) return out;

  auto pos = label_position(text, start + phrase_len);
  if (!pos) return out;
  out.label = text[*pos] - '0';
  out.method = method;
  out.raw_span = std::string(text.substr(start, *pos + 1 - start));
  return out;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

namespace {

bool meets(std::size_t correct, std::size_t total, double threshold) {
  if (total == 0) return false;
  return static_cast<double>(correct) + 1e-9 >= threshold * static_cast<double>(total);
}

}  // namespace

ExamReport score_exam(const Exam& exam, const std::map<std::string, ExtractedAnswer>& answers) {
  for (const auto& [id, a] : answers) {
    if (!exam.find(id)) throw UnknownQuestionId(id);
  }

  ExamReport report;
  report.level = exam.level;
  std::map<std::string, std::pair<std::size_t, std::size_t>> modules;  // tag -> (correct, total)
  for (const auto& q : exam.questions) {
    QuestionResult r;
    r.question_id = q.id;
    if (auto it = answers.find(q.id); it != answers.end()) r.extracted = it->second;
    r.correct = r.extracted.label && *r.extracted.label == q.answer_key;
    if (r.correct) ++report.correct_count;
    if (q.module_tag) {
      auto& m = modules[*q.module_tag];
      m.second += 1;
      if (r.correct) m.first += 1;
    }
    report.results.push_back(std::move(r));
  }

  const std::size_t n = exam.questions.size();
  report.overall_pct = n ? static_cast<double>(report.correct_count) / static_cast<double>(n) : 0.0;
  for (const auto& [tag, m] : modules) report.module_pct[tag] = static_cast<double>(m.first) / static_cast<double>(m.second);

  report.passed = meets(report.correct_count, n, exam.passing_rule.overall_threshold);
  for (const auto& [tag, threshold] : exam.passing_rule.module_thresholds) {
    auto it = modules.find(tag);
    if (it == modules.end() || !meets(it->second.first, it->second.second, threshold)) report.passed = false;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

EvalRun run_eval(const Exam& exam, Gateway& gateway, const BackendSpec& backend, const PromptVariant& variant,
                 const EvalOptions& options) {
  const std::size_t n = exam.questions.size();
  std::vector<AuditEntry> audit(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& q = exam.questions[i];
      const auto prompt = render_exam_prompt(q, variant);
      ChatRequest req{prompt.system, prompt.user, options.temperature, options.max_output_tokens, options.seed};

      AuditEntry& e = audit[i];
      e.question_id = q.id;
      e.backend_id = backend.id;
      e.variant = std::string(to_string(variant.id));
      e.request_hash = request_hash(req, backend);
      try {
        e.response_text = gateway.complete(req, backend).text;
        e.extracted = extract_answer(e.response_text);
      } catch (const std::exception& ex) {
        e.error = ex.what();
      }
      e.correct = e.extracted.label && *e.extracted.label == q.answer_key;
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(std::min(options.parallelism, backend.max_in_flight), 1, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::map<std::string, ExtractedAnswer> answers;
  for (const auto& e : audit) answers[e.question_id] = e.extracted;

  EvalRun run;
  run.report = score_exam(exam, answers);
  run.report.backend_id = backend.id;
  run.report.prompt_variant = std::string(to_string(variant.id));
  for (std::size_t i = 0; i < n; ++i) {
    run.report.results[i].response_text = audit[i].response_text;
    run.report.results[i].error = audit[i].error;
  }
  run.audit = std::move(audit);
  return run;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string format_percent(double fraction) {
  const double pct = fraction * 100.0;
  char buf[32];
  if (std::fabs(pct - std::round(pct)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "%.0f%%", std::round(pct));
  } else {
    std::snprintf(buf, sizeof buf, "%.1f%%", pct);
  }
  return buf;
}

namespace {

struct ReportRow {
  std::string backend;
  std::string variant;
  std::array<const ExamReport*, 3> cells{};
};

std::vector<ReportRow> group_rows(const std::vector<ExamReport>& reports) {
  std::vector<ReportRow> rows;
  for (const auto& r : reports) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const ReportRow& row) { return row.backend == r.backend_id && row.variant == r.prompt_variant; });
    if (it == rows.end()) {
      rows.push_back({r.backend_id, r.prompt_variant, {}});
      it = rows.end() - 1;
    }
    it->cells[static_cast<std::size_t>(r.level)] = &r;
  }
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string emit_report(const std::vector<ExamReport>& reports, ReportFormat format) {
  const auto rows = group_rows(reports);
  const std::array<std::string, 3> levels{"P1", "P2", "P3"};

  if (format == ReportFormat::Csv) {
    std::string out = "backend,variant,P1,P1_result,P2,P2_result,P3,P3_result\r\n";
    for (const auto& row : rows) {
      out += csv_field(row.backend) + "," + csv_field(row.variant);
      for (const auto* cell : row.cells) {
        out += ",";
        out += cell ? format_percent(cell->overall_pct) : "";
        out += ",";
        out += cell ? (cell->passed ? "pass" : "fail") : "";
      }
      out += "\r\n";
    }
    return out;
  }

  std::vector<std::array<std::string, 5>> table;
  table.push_back({"Model", "Variant", levels[0], levels[1], levels[2]});
  for (const auto& row : rows) {
    std::array<std::string, 5> line{row.backend, row.variant, "-", "-", "-"};
    for (std::size_t i = 0; i < 3; ++i) {
      if (row.cells[i]) line[i + 2] = format_percent(row.cells[i]->overall_pct) + (row.cells[i]->passed ? " pass" : " fail");
    }
    table.push_back(std::move(line));
  }
  std::array<std::size_t, 5> width{};
  for (const auto& line : table) {
    for (std::size_t i = 0; i < 5; ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    std::string text;
    for (std::size_t i = 0; i < 5; ++i) {
      if (i) text += "  ";
      text += table[r][i];
      if (i + 1 < 5) text.append(width[i] - table[r][i].size(), ' ');
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out += text + "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 8, '-') + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

nlohmann::ordered_json extracted_to_json(const ExtractedAnswer& a) {
  nlohmann::ordered_json j;
  j["label"] = a.label ? nlohmann::ordered_json(*a.label) : nlohmann::ordered_json(nullptr);
  j["method"] = to_string(a.method);
  j["raw_span"] = a.raw_span;
  return j;
}

ExtractedAnswer extracted_from_json(const nlohmann::ordered_json& j) {
  ExtractedAnswer a;
  if (j.contains("label") && !j.at("label").is_null()) a.label = j.at("label").get<int>();
  a.method = parse_extraction_method(j.at("method").get<std::string>());
  a.raw_span = j.value("raw_span", std::string{});
  return a;
}

nlohmann::ordered_json report_to_json(const ExamReport& r) {
  nlohmann::ordered_json j;
  j["level"] = to_string(r.level);
  j["backend_id"] = r.backend_id;
  j["prompt_variant"] = r.prompt_variant;
  j["question_count"] = r.results.size();
  j["correct_count"] = r.correct_count;
  j["overall_pct"] = r.overall_pct;
  j["module_pct"] = nlohmann::ordered_json::object();
  for (const auto& [tag, pct] : r.module_pct) j["module_pct"][tag] = pct;
  j["passed"] = r.passed;
  j["results"] = nlohmann::ordered_json::array();
  for (const auto& q : r.results) {
    nlohmann::ordered_json jq;
    jq["question_id"] = q.question_id;
    jq["extracted"] = extracted_to_json(q.extracted);
    jq["correct"] = q.correct;
    jq["response_text"] = q.response_text;
    if (!q.error.empty()) jq["error"] = q.error;
    j["results"].push_back(std::move(jq));
  }
  return j;
}

ExamReport report_from_json(const nlohmann::ordered_json& j) {
  ExamReport r;
  r.level = parse_exam_level(j.at("level").get<std::string>());
  r.backend_id = j.at("backend_id").get<std::string>();
  r.prompt_variant = j.at("prompt_variant").get<std::string>();
  r.correct_count = j.at("correct_count").get<std::size_t>();
  r.overall_pct = j.at("overall_pct").get<double>();
  for (const auto& [tag, pct] : j.at("module_pct").items()) r.module_pct[tag] = pct.get<double>();
  r.passed = j.at("passed").get<bool>();
  for (const auto& jq : j.at("results")) {
    QuestionResult q;
    q.question_id = jq.at("question_id").get<std::string>();
    q.extracted = extracted_from_json(jq.at("extracted"));
    q.correct = jq.at("correct").get<bool>();
    q.response_text = jq.value("response_text", std::string{});
    q.error = jq.value("error", std::string{});
    r.results.push_back(std::move(q));
  }
  return r;
}

nlohmann::ordered_json audit_to_json(const AuditEntry& e) {
  nlohmann::ordered_json j;
  j["question_id"] = e.question_id;
  j["backend_id"] = e.backend_id;
  j["variant"] = e.variant;
  j["request_hash"] = e.request_hash;
  j["response_text"] = e.response_text;
  j["extracted"] = extracted_to_json(e.extracted);
  j["correct"] = e.correct;
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

}  // namespace examforge
