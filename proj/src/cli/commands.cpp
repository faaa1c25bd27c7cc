#include "examforge/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "examforge/dataset.hpp"
#include "examforge/tokenizer.hpp"

namespace examforge::cli {

namespace {

bool is_markdown(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".md" || ext == ".markdown";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string doc_id_for(const fs::path& rel) {
  auto id = rel;
  id.replace_extension();
  return id.generic_string();
}

std::string file_stem_for(const std::string& doc_id) {
  std::string s = doc_id;
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

nlohmann::ordered_json path_list(const std::vector<fs::path>& paths) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : paths) arr.push_back(p.generic_string());
  return arr;
}

nlohmann::ordered_json variant_list(const std::vector<PromptVariantId>& ids) {
  auto arr = nlohmann::ordered_json::array();
  for (auto id : ids) arr.push_back(std::string(to_string(id)));
  return arr;
}

std::vector<Chunk> chunk_sources(const std::vector<MarkdownSource>& sources, const ChunkOptions& options) {
  ChunkConfig config;
  config.max_tokens = options.max_tokens;
  config.primary_split_level = options.split_level;
  config.tokenizer = TokenizerRegistry::global().get(options.tokenizer);
  config.validate();
  std::vector<Chunk> all;
  for (const auto& src : sources) {
    config.doc_id = src.doc_id;
    config.doc_label = src.label;
    auto chunks = chunk_document(read_file(src.path), config);
    all.insert(all.end(), std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end()));
  }
  return all;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
}

}  // namespace

void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::ordered_json& settings) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const auto path = dir / (command + ".manifest.json");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  nlohmann::ordered_json doc;
  doc["command"] = command;
  doc["settings"] = settings;
  out << doc.dump(2) << '\n';
}

std::vector<MarkdownSource> collect_markdown(const std::vector<fs::path>& inputs,
                                             const std::optional<std::string>& label_override) {
  std::vector<MarkdownSource> out;
  for (const auto& input : inputs) {
    if (fs::is_directory(input)) {
      const auto root = fs::weakly_canonical(input);
      const std::string dir_name = root.filename().string();
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(input)) {
        if (e.is_regular_file() && is_markdown(e.path())) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        const auto rel = fs::relative(f, input);
        MarkdownSource src;
        src.path = f;
        src.doc_id = doc_id_for(fs::path(dir_name) / rel);
        const auto first = *rel.begin();
        src.label = label_override ? *label_override
                    : rel.has_parent_path() ? first.string()
                                            : dir_name;
        out.push_back(std::move(src));
      }
    } else if (fs::is_regular_file(input)) {
      MarkdownSource src;
      src.path = input;
      src.doc_id = doc_id_for(input.filename());
      src.label = label_override ? *label_override : fs::weakly_canonical(input).parent_path().filename().string();
      out.push_back(std::move(src));
    } else {
      throw IoError("no such file or directory: " + input.string());
    }
  }
  return out;
}

// --- chunk ------------------------------------------------------------------

ChunkSummary cmd_chunk(const ChunkOptions& options, std::ostream& log) {
  const auto sources = collect_markdown(options.inputs, options.label);
  const auto counter = TokenizerRegistry::global().get(options.tokenizer);

  ChunkSummary summary;
  std::vector<Chunk> all;
  for (const auto& src : sources) {
    auto chunks = chunk_sources({src}, options);
    std::vector<nlohmann::ordered_json> lines;
    std::size_t overflow = 0;
    for (const auto& c : chunks) {
      lines.push_back(chunk_to_json(c));
      if (c.atomic_overflow) ++overflow;
    }
    const auto file = options.out_dir / (file_stem_for(src.doc_id) + ".chunks.jsonl");
    write_jsonl(lines, file);
    summary.files.push_back(file);
    summary.chunk_count += chunks.size();
    if (overflow > 0) log << "warning: " << src.doc_id << ": " << overflow << " chunk(s) over budget\n";
    all.insert(all.end(), std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end()));
  }
  summary.stats = corpus_stats(all, *counter);

  nlohmann::ordered_json stats;
  for (const auto& [label, n] : summary.stats.per_label) stats["per_label"][label] = n;
  stats["total"] = summary.stats.total;
  write_jsonl({stats}, options.out_dir / "corpus_stats.jsonl");

  nlohmann::ordered_json settings;
  settings["inputs"] = path_list(options.inputs);
  settings["max_tokens"] = options.max_tokens;
  settings["split_level"] = options.split_level;
  settings["tokenizer"] = options.tokenizer;
  settings["label"] = options.label ? nlohmann::ordered_json(*options.label) : nlohmann::ordered_json();
  settings["documents"] = sources.size();
  settings["chunks"] = summary.chunk_count;
  write_manifest(options.out_dir, "chunk", settings);
  return summary;
}

// --- stats ------------------------------------------------------------------

CorpusStats cmd_stats(const StatsOptions& options) {
  std::vector<fs::path> files;
  for (const auto& input : options.inputs) {
    if (fs::is_directory(input)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(input)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.size() > 13 && name.ends_with(".chunks.jsonl")) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(input);
    }
  }
  std::vector<Chunk> chunks;
  for (const auto& f : files) {
    for (const auto& j : read_jsonl(f)) chunks.push_back(chunk_from_json(j));
  }
  return corpus_stats(chunks, *TokenizerRegistry::global().get(options.tokenizer));
}

// --- augment ----------------------------------------------------------------

AugmentMode parse_augment_mode(std::string_view s) {
  if (s == "bias") return AugmentMode::Bias;
  if (s == "shuffle") return AugmentMode::Shuffle;
  if (s == "prompts") return AugmentMode::Prompts;
  if (s == "mdqa") return AugmentMode::Mdqa;
  throw std::invalid_argument("unknown augment mode: " + std::string(s));
}

std::string_view to_string(AugmentMode m) {
  switch (m) {
    case AugmentMode::Bias: return "bias";
    case AugmentMode::Shuffle: return "shuffle";
    case AugmentMode::Prompts: return "prompts";
    case AugmentMode::Mdqa: return "mdqa";
  }
  return "shuffle";
}

AugmentSummary cmd_augment(const AugmentOptions& options, std::ostream& log) {
  const std::string mode(to_string(options.mode));
  AugmentSummary summary;
  summary.sft_file = options.out_dir / (mode + ".sft.jsonl");
  std::vector<SftRecord> sft;
  std::vector<DpoRecord> dpo;

  nlohmann::ordered_json settings;
  settings["mode"] = mode;

  switch (options.mode) {
    case AugmentMode::Bias: {
      const Exam exam = load_exam(options.exam);
      const auto responses = read_typed<ResponseRecord>(options.responses, response_from_json);
      // First usable response per (question, target), in file order.
      std::map<std::string, std::map<int, std::string>> reasons;
      for (const auto& r : responses) {
        if (!r.target || !r.error.empty()) continue;
        auto& slot = reasons[r.question_id];
        if (!slot.contains(*r.target)) {
          auto reason = reason_from_response(r.text);
          if (!reason.empty()) slot.emplace(*r.target, std::move(reason));
        }
      }
      for (const auto& q : exam.questions) {
        try {
          auto [s, d] = harvest_bias_outputs(q, reasons[q.id]);
          sft.insert(sft.end(), s.begin(), s.end());
          dpo.insert(dpo.end(), d.begin(), d.end());
        } catch (const MissingCorrectReason& e) {
          log << "warning: " << e.what() << '\n';
          ++summary.warnings;
        }
      }
      settings["exam"] = options.exam.generic_string();
      settings["responses"] = options.responses.generic_string();
      break;
    }
    case AugmentMode::Shuffle: {
      const Exam exam = load_exam(options.exam);
      const auto n = static_cast<std::uint64_t>(options.shuffles);
      for (std::size_t i = 0; i < exam.questions.size(); ++i) {
        auto records = build_shuffle_set(exam.questions[i], options.shuffles, options.seed + i * n);
        sft.insert(sft.end(), records.begin(), records.end());
      }
      settings["exam"] = options.exam.generic_string();
      settings["seed"] = options.seed;
      settings["shuffles"] = options.shuffles;
      break;
    }
    case AugmentMode::Prompts: {
      std::vector<PromptVariant> variants;
      if (options.variants.empty()) {
        variants = all_prompt_variants();
      } else {
        for (auto id : options.variants) variants.push_back(prompt_variant(id));
      }
      for (const auto& r : read_typed<SftRecord>(options.records, sft_from_json)) {
        auto expanded = expand_system_prompts(r, variants);
        sft.insert(sft.end(), expanded.begin(), expanded.end());
      }
      settings["records"] = options.records.generic_string();
      auto ids = nlohmann::ordered_json::array();
      for (const auto& v : variants) ids.push_back(std::string(to_string(v.id)));
      settings["variants"] = ids;
      break;
    }
    case AugmentMode::Mdqa: {
      auto sources = collect_markdown(options.markdown, options.chunking.label);
      if (options.cpt_label) {
        std::erase_if(sources, [&](const MarkdownSource& s) { return s.label != *options.cpt_label; });
      }
      sft = qa_from_markdown(chunk_sources(sources, options.chunking));
      settings["inputs"] = path_list(options.markdown);
      settings["max_tokens"] = options.chunking.max_tokens;
      settings["split_level"] = options.chunking.split_level;
      settings["tokenizer"] = options.chunking.tokenizer;
      settings["cpt_label"] =
          options.cpt_label ? nlohmann::ordered_json(*options.cpt_label) : nlohmann::ordered_json();
      break;
    }
  }

  summary.sft = write_typed(sft, summary.sft_file, sft_to_json);
  if (options.mode == AugmentMode::Bias) {
    summary.dpo_file = options.out_dir / (mode + ".dpo.jsonl");
    summary.dpo = write_typed(dpo, summary.dpo_file, dpo_to_json);
  }
  settings["sft_records"] = summary.sft;
  settings["dpo_records"] = summary.dpo;
  settings["warnings"] = summary.warnings;
  write_manifest(options.out_dir, "augment-" + mode, settings);
  return summary;
}

// --- generate ---------------------------------------------------------------

GenerateMode parse_generate_mode(std::string_view s) {
  if (s == "answer") return GenerateMode::Answer;
  if (s == "bias") return GenerateMode::Bias;
  throw std::invalid_argument("unknown generate mode: " + std::string(s));
}

nlohmann::ordered_json response_to_json(const ResponseRecord& r) {
  nlohmann::ordered_json j;
  j["question_id"] = r.question_id;
  j["backend_id"] = r.backend_id;
  j["variant"] = std::string(to_string(r.variant));
  j["target"] = r.target ? nlohmann::ordered_json(*r.target) : nlohmann::ordered_json();
  j["request_hash"] = r.request_hash;
  j["text"] = r.text;
  j["error"] = r.error;
  return j;
}

ResponseRecord response_from_json(const nlohmann::ordered_json& j) {
  ResponseRecord r;
  r.question_id = j.at("question_id").get<std::string>();
  r.backend_id = j.at("backend_id").get<std::string>();
  r.variant = parse_prompt_variant(j.at("variant").get<std::string>());
  if (j.contains("target") && !j["target"].is_null()) r.target = j["target"].get<int>();
  r.request_hash = j.value("request_hash", "");
  r.text = j.value("text", "");
  r.error = j.value("error", "");
  return r;
}

GenerateSummary cmd_generate(const GenerateOptions& options, Gateway& gateway, std::ostream& log) {
  if (options.backends.empty()) throw std::invalid_argument("generate: no backends configured");
  const Exam exam = load_exam(options.exam);

  struct Task {
    const ExamQuestion* q;
    const BackendSpec* backend;
    PromptVariantId variant;
    std::optional<int> target;
  };
  std::vector<Task> tasks;
  std::vector<PromptVariantId> variants = options.variants;
  if (options.mode == GenerateMode::Bias) {
    variants = {PromptVariantId::ZeroShotBias};
  } else if (variants.empty()) {
    variants = {PromptVariantId::CoT, PromptVariantId::ZeroShotMultiLLM};
  }
  for (const auto& q : exam.questions) {
    if (options.mode == GenerateMode::Bias) {
      for (int t = 1; t <= kChoiceCount; ++t)
        for (const auto& b : options.backends) tasks.push_back({&q, &b, PromptVariantId::ZeroShotBias, t});
    } else {
      for (const auto& b : options.backends)
        for (auto v : variants) tasks.push_back({&q, &b, v, std::nullopt});
    }
  }

  GenerateSummary summary;
  summary.records.resize(tasks.size());
  parallel_for(tasks.size(), options.parallelism, [&](std::size_t i) {
    const auto& task = tasks[i];
    const RenderedPrompt prompt = task.target ? render_bias_prompt(*task.q, *task.target)
                                              : render_exam_prompt(*task.q, prompt_variant(task.variant));
    ChatRequest req{prompt.system, prompt.user, options.temperature, options.max_output_tokens, options.seed};
    ResponseRecord rec;
    rec.question_id = task.q->id;
    rec.backend_id = task.backend->id;
    rec.variant = task.variant;
    rec.target = task.target;
    rec.request_hash = request_hash(req, *task.backend);
    try {
      const auto resp = gateway.complete(req, *task.backend);
      rec.text = resp.text;
      rec.cached = resp.cached;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    summary.records[i] = std::move(rec);
  });

  for (const auto& r : summary.records) {
    if (r.cached) ++summary.cached;
    if (!r.error.empty()) {
      ++summary.errors;
      log << "warning: " << r.question_id << " @ " << r.backend_id << ": " << r.error << '\n';
    }
  }
  write_typed(summary.records, options.out_file, response_to_json);

  nlohmann::ordered_json settings;
  settings["mode"] = options.mode == GenerateMode::Bias ? "bias" : "answer";
  settings["exam"] = options.exam.generic_string();
  auto backends = nlohmann::ordered_json::array();
  for (const auto& b : options.backends) backends.push_back(b.id);
  settings["backends"] = backends;
  settings["variants"] = variant_list(variants);
  settings["seed"] = options.seed ? nlohmann::ordered_json(*options.seed) : nlohmann::ordered_json();
  settings["temperature"] = options.temperature;
  settings["max_output_tokens"] = options.max_output_tokens;
  settings["records"] = summary.records.size();
  settings["errors"] = summary.errors;
  const auto dir = options.out_file.has_parent_path() ? options.out_file.parent_path() : fs::path(".");
  write_manifest(dir, "generate-" + options.out_file.stem().string(), settings);
  return summary;
}

// --- pair-dpo ---------------------------------------------------------------

PairSummary cmd_pair_dpo(const PairOptions& options, std::ostream& log) {
  const Exam exam = load_exam(options.exam);
  std::map<std::string, std::vector<CandidateResponse>> by_question;
  for (const auto& r : read_typed<ResponseRecord>(options.responses, response_from_json)) {
    if (r.target || !r.error.empty()) continue;
    if (!exam.find(r.question_id)) throw UnknownQuestionId(r.question_id);
    by_question[r.question_id].push_back({r.backend_id, r.variant, r.text});
  }

  PairSummary summary;
  std::vector<DpoRecord> out;
  for (const auto& q : exam.questions) {
    auto pairs = pair_multi_llm(q, by_question[q.id], options.pair_cap);
    if (pairs.empty()) {
      ++summary.questions_without_pairs;
      log << "warning: " << q.id << ": no chosen/rejected pair\n";
    }
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  summary.pairs = write_typed(out, options.out_file, dpo_to_json);

  nlohmann::ordered_json settings;
  settings["exam"] = options.exam.generic_string();
  settings["responses"] = options.responses.generic_string();
  settings["pair_cap"] = options.pair_cap;
  settings["pairs"] = summary.pairs;
  settings["questions_without_pairs"] = summary.questions_without_pairs;
  const auto dir = options.out_file.has_parent_path() ? options.out_file.parent_path() : fs::path(".");
  write_manifest(dir, "pair-dpo", settings);
  return summary;
}

// --- eval / report ----------------------------------------------------------

EvalSummary cmd_eval(const EvalCommandOptions& options, Gateway& gateway, std::ostream& log) {
  const Exam exam = load_exam(options.exam);
  EvalSummary summary;
  summary.run = run_eval(exam, gateway, options.backend, prompt_variant(options.variant), options.eval);

  const std::string stem = std::string(to_string(exam.level)) + "_" + options.backend.id + "_" +
                           std::string(to_string(options.variant));
  summary.report_file = options.out_dir / ("report_" + stem + ".json");
  summary.audit_file = options.out_dir / ("audit_" + stem + ".jsonl");
  {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    std::ofstream out(summary.report_file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + summary.report_file.string());
    out << report_to_json(summary.run.report).dump(2) << '\n';
  }
  write_typed(summary.run.audit, summary.audit_file, audit_to_json);

  for (const auto& r : summary.run.report.results) {
    if (!r.error.empty()) log << "warning: " << r.question_id << ": " << r.error << '\n';
  }
  summary.rendered = emit_report({summary.run.report}, options.format);

  nlohmann::ordered_json settings;
  settings["exam"] = options.exam.generic_string();
  settings["backend"] = options.backend.id;
  settings["variant"] = std::string(to_string(options.variant));
  settings["temperature"] = options.eval.temperature;
  settings["max_output_tokens"] = options.eval.max_output_tokens;
  settings["seed"] = options.eval.seed ? nlohmann::ordered_json(*options.eval.seed) : nlohmann::ordered_json();
  write_manifest(options.out_dir, "eval_" + stem, settings);
  return summary;
}

std::string cmd_report(const std::vector<fs::path>& report_files, ReportFormat format) {
  std::vector<ExamReport> reports;
  for (const auto& f : report_files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + f.string());
    reports.push_back(report_from_json(nlohmann::ordered_json::parse(in)));
  }
  return emit_report(reports, format);
}

}  // namespace examforge::cli
