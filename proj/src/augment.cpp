#include "examforge/augment.hpp"

#include <algorithm>
#include <tuple>

#include "examforge/eval.hpp"

namespace examforge {

std::string_view to_string(SftSource s) {
  switch (s) {
    case SftSource::BiasReason: return "bias_reason";
    case SftSource::MarkdownQa: return "markdown_qa";
    case SftSource::Shuffle: return "shuffle";
  }
  return "shuffle";
}

std::string_view to_string(DpoSource s) {
  switch (s) {
    case DpoSource::BiasReason: return "bias_reason";
    case DpoSource::MultiLlm: return "multi_llm";
  }
  return "bias_reason";
}

namespace {

SftSource parse_sft_source(std::string_view s) {
  if (s == "bias_reason") return SftSource::BiasReason;
  if (s == "markdown_qa") return SftSource::MarkdownQa;
  if (s == "shuffle") return SftSource::Shuffle;
  throw std::invalid_argument("unknown SFT source: " + std::string(s));
}

DpoSource parse_dpo_source(std::string_view s) {
  if (s == "bias_reason") return DpoSource::BiasReason;
  if (s == "multi_llm") return DpoSource::MultiLlm;
  throw std::invalid_argument("unknown DPO source: " + std::string(s));
}

std::string_view trim(std::string_view s) {
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

void check_label(int label) {
  if (label < 1 || label > kChoiceCount) throw std::out_of_range("choice label must be 1..4");
}

}  // namespace

// ---------------------------------------------------------------------------
// Biased zero-shot reasoning
// ---------------------------------------------------------------------------

std::string bias_target_line(int target) {
  check_label(target);
  return "Assume the correct answer is choice " + std::to_string(target) + "; provide the backup reason.";
}

RenderedPrompt render_bias_prompt(const ExamQuestion& q, int target) {
  return {std::string(kZeroShotBiasSystemPrompt), render_question(q) + "\n\n" + bias_target_line(target)};
}

std::string reason_from_response(std::string_view response) {
  const auto pos = response.rfind(kReasonMarker);
  if (pos == std::string_view::npos) return std::string(trim(response));
  return std::string(trim(response.substr(pos + kReasonMarker.size())));
}

std::string format_reasoned_answer(int label, std::string_view reason) {
  std::string out(kAnswerPhrase);
  out += ' ';
  out += std::to_string(label);
  out += "\n\n";
  out += kReasonMarker;
  out += '\n';
  out += reason;
  return out;
}

std::vector<BiasReason> bias_reasons(const ExamQuestion& q, const std::map<int, std::string>& reasons) {
  std::vector<BiasReason> out;
  for (const auto& [label, text] : reasons) {
    check_label(label);
    if (trim(text).empty()) continue;
    out.push_back({q.id, label, std::string(trim(text)), label == q.answer_key});
  }
  return out;
}

std::pair<std::vector<SftRecord>, std::vector<DpoRecord>> harvest_bias_outputs(
    const ExamQuestion& q, const std::map<int, std::string>& reasons) {
  const auto all = bias_reasons(q, reasons);
  auto correct = std::find_if(all.begin(), all.end(), [](const BiasReason& r) { return r.is_correct; });
  if (correct == all.end()) throw MissingCorrectReason(q.id);

  const std::string system(kZeroShotBiasSystemPrompt);
  const std::string user = render_question(q);
  const std::string chosen = format_reasoned_answer(correct->choice_label, correct->reason_text);

  std::vector<SftRecord> sft;
  SftRecord rec{system, user, chosen, {}};
  rec.meta.source = SftSource::BiasReason;
  rec.meta.question_id = q.id;
  rec.meta.variant_id = PromptVariantId::ZeroShotBias;
  sft.push_back(std::move(rec));

  std::vector<DpoRecord> dpo;
  for (const auto& r : all) {
    if (r.is_correct) continue;
    DpoRecord d{system, user, chosen, format_reasoned_answer(r.choice_label, r.reason_text), {}};
    d.meta.source = DpoSource::BiasReason;
    d.meta.question_id = q.id;
    d.meta.prompt_variant = PromptVariantId::ZeroShotBias;
    d.meta.rejected_choice = r.choice_label;
    dpo.push_back(std::move(d));
  }
  return {std::move(sft), std::move(dpo)};
}

// ---------------------------------------------------------------------------
// System prompts, shuffles, markdown Q&A
// ---------------------------------------------------------------------------

std::vector<SftRecord> expand_system_prompts(const SftRecord& record, const std::vector<PromptVariant>& variants) {
  if (variants.empty()) throw std::invalid_argument("expand_system_prompts needs at least one prompt variant");
  std::vector<SftRecord> out;
  out.reserve(variants.size());
  for (const auto& v : variants) {
    SftRecord r = record;
    r.system = std::string(v.system_text);
    r.meta.variant_id = v.id;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_final_answer(int label, std::string_view choice_text) {
  std::string out(kAnswerAnchor);
  out += ' ';
  out += std::to_string(label);
  out += ") ";
  out += choice_text;
  return out;
}

std::vector<SftRecord> build_shuffle_set(const ExamQuestion& q, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("build_shuffle_set needs n >= 1");
  std::vector<SftRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const auto [shuffled, perm] = shuffle_choices(q, s);
    SftRecord r;
    r.system = std::string(kCoTSystemPrompt);
    r.user = render_question(shuffled);
    r.assistant = format_final_answer(shuffled.answer_key, shuffled.correct_text());
    r.meta.source = SftSource::Shuffle;
    r.meta.question_id = q.id;
    r.meta.seed = s;
    r.meta.variant_id = PromptVariantId::CoT;
    r.meta.prng = std::string(kShufflePrng);
    r.meta.permutation = perm.images();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SftRecord> qa_from_markdown(const std::vector<Chunk>& chunks, const MarkdownQaOptions& options) {
  struct Pending {
    std::tuple<std::string, std::size_t, int, std::string> key;
    std::string question;
    std::string answer;
    std::string doc_id;
  };
  std::vector<Pending> pending;

  auto question_for = [&](const HeaderPath& path) {
    std::string joined;
    for (std::size_t i = 0; i < path.entries.size(); ++i) {
      if (i) joined += " > ";
      joined += path.entries[i].text;
    }
    std::string q = options.question_template;
    auto replace = [&q](std::string_view token, const std::string& value) {
      for (auto pos = q.find(token); pos != std::string::npos; pos = q.find(token, pos + value.size()))
        q.replace(pos, token.size(), value);
    };
    replace("{title}", path.entries.back().text);
    replace("{path}", joined);
    return q;
  };

  for (const Chunk& chunk : chunks) {
    HeaderPath stack = chunk.context;
    for (const Block& b : chunk.blocks) {
      if (b.is_header()) {
        stack.push({b.level, b.text, b.source_line});
        continue;
      }
      if (stack.empty() || trim(b.text).empty()) continue;
      const HeaderEntry& h = stack.entries.back();
      auto key = std::make_tuple(chunk.doc_id, h.source_line, h.level, h.text);
      auto it = std::find_if(pending.begin(), pending.end(), [&](const Pending& p) { return p.key == key; });
      if (it == pending.end()) {
        pending.push_back({key, question_for(stack), b.text, chunk.doc_id});
      } else {
        it->answer += "\n\n";
        it->answer += b.text;
      }
    }
  }

  std::vector<SftRecord> out;
  out.reserve(pending.size());
  for (auto& p : pending) {
    SftRecord r{options.system_prompt, std::move(p.question), std::move(p.answer), {}};
    r.meta.source = SftSource::MarkdownQa;
    r.meta.doc_id = p.doc_id;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-LLM validation and pairing
// ---------------------------------------------------------------------------

Verdict validate_response(const ExamQuestion& q, PromptVariantId variant, std::string_view text) {
  const auto extracted = extract_answer(text);
  if (!extracted.label || *extracted.label != q.answer_key) return Verdict::Rejected;
  return has_scaffold(variant, text) ? Verdict::Accepted : Verdict::Excluded;
}

std::vector<DpoRecord> pair_multi_llm(const ExamQuestion& q, const std::vector<CandidateResponse>& responses,
                                      std::size_t cap) {
  std::vector<PromptVariantId> order;
  for (const auto& r : responses) {
    if (std::find(order.begin(), order.end(), r.prompt_variant) == order.end()) order.push_back(r.prompt_variant);
  }

  std::vector<DpoRecord> out;
  const std::string user = render_question(q);
  for (PromptVariantId variant : order) {
    std::vector<const CandidateResponse*> accepted;
    std::vector<const CandidateResponse*> rejected;
    for (const auto& r : responses) {
      if (r.prompt_variant != variant) continue;
      switch (validate_response(q, variant, r.text)) {
        case Verdict::Accepted: accepted.push_back(&r); break;
        case Verdict::Rejected: rejected.push_back(&r); break;
        case Verdict::Excluded: break;
      }
    }

    std::vector<std::pair<const CandidateResponse*, const CandidateResponse*>> pairs;
    for (const auto* a : accepted) {
      for (const auto* r : rejected) {
        if (a->text != r->text) pairs.emplace_back(a, r);
      }
    }
    std::stable_partition(pairs.begin(), pairs.end(),
                          [](const auto& p) { return p.first->backend_id != p.second->backend_id; });
    if (pairs.size() > cap) pairs.resize(cap);

    const std::string system(prompt_variant(variant).system_text);
    for (const auto& [a, r] : pairs) {
      DpoRecord d{system, user, a->text, r->text, {}};
      d.meta.source = DpoSource::MultiLlm;
      d.meta.question_id = q.id;
      d.meta.chosen_backend = a->backend_id;
      d.meta.rejected_backend = r->backend_id;
      d.meta.prompt_variant = variant;
      out.push_back(std::move(d));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

template <typename T>
nlohmann::ordered_json opt(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const nlohmann::ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

nlohmann::ordered_json sft_to_json(const SftRecord& r) {
  nlohmann::ordered_json meta;
  meta["source"] = to_string(r.meta.source);
  meta["question_id"] = opt(r.meta.question_id);
  meta["doc_id"] = opt(r.meta.doc_id);
  meta["seed"] = opt(r.meta.seed);
  meta["variant_id"] = r.meta.variant_id ? nlohmann::ordered_json(to_string(*r.meta.variant_id)) : nlohmann::ordered_json(nullptr);
  meta["prng"] = opt(r.meta.prng);
  meta["permutation"] = opt(r.meta.permutation);

  nlohmann::ordered_json j;
  j["system"] = r.system;
  j["user"] = r.user;
  j["assistant"] = r.assistant;
  j["meta"] = std::move(meta);
  return j;
}

SftRecord sft_from_json(const nlohmann::ordered_json& j) {
  SftRecord r;
  r.system = j.at("system").get<std::string>();
  r.user = j.at("user").get<std::string>();
  r.assistant = j.at("assistant").get<std::string>();
  const auto& m = j.at("meta");
  r.meta.source = parse_sft_source(m.at("source").get<std::string>());
  r.meta.question_id = get_opt<std::string>(m, "question_id");
  r.meta.doc_id = get_opt<std::string>(m, "doc_id");
  r.meta.seed = get_opt<std::uint64_t>(m, "seed");
  if (auto v = get_opt<std::string>(m, "variant_id")) r.meta.variant_id = parse_prompt_variant(*v);
  r.meta.prng = get_opt<std::string>(m, "prng");
  r.meta.permutation = get_opt<std::array<int, kChoiceCount>>(m, "permutation");
  return r;
}

nlohmann::ordered_json dpo_to_json(const DpoRecord& r) {
  nlohmann::ordered_json meta;
  meta["source"] = to_string(r.meta.source);
  meta["question_id"] = r.meta.question_id;
  meta["chosen_backend"] = opt(r.meta.chosen_backend);
  meta["rejected_backend"] = opt(r.meta.rejected_backend);
  meta["prompt_variant"] = to_string(r.meta.prompt_variant);
  meta["rejected_choice"] = opt(r.meta.rejected_choice);

  nlohmann::ordered_json j;
  j["system"] = r.system;
  j["user"] = r.user;
  j["chosen"] = r.chosen;
  j["rejected"] = r.rejected;
  j["meta"] = std::move(meta);
  return j;
}

DpoRecord dpo_from_json(const nlohmann::ordered_json& j) {
  DpoRecord r;
  r.system = j.at("system").get<std::string>();
  r.user = j.at("user").get<std::string>();
  r.chosen = j.at("chosen").get<std::string>();
  r.rejected = j.at("rejected").get<std::string>();
  const auto& m = j.at("meta");
  r.meta.source = parse_dpo_source(m.at("source").get<std::string>());
  r.meta.question_id = m.at("question_id").get<std::string>();
  r.meta.chosen_backend = get_opt<std::string>(m, "chosen_backend");
  r.meta.rejected_backend = get_opt<std::string>(m, "rejected_backend");
  r.meta.prompt_variant = parse_prompt_variant(m.at("prompt_variant").get<std::string>());
  r.meta.rejected_choice = get_opt<int>(m, "rejected_choice");
  return r;
}

}  // namespace examforge
