#pragma once

// Pipeline stages behind the command-line tool. Each function takes fully
// resolved options, writes its outputs plus a run manifest, and returns a
// summary. Hard errors throw; per-entry failures are counted in `warnings`.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "examforge/augment.hpp"
#include "examforge/eval.hpp"
#include "examforge/exam.hpp"
#include "examforge/gateway.hpp"
#include "examforge/markdown.hpp"
#include "json.hpp"

namespace examforge::cli {

namespace fs = std::filesystem;

/// Writes `settings` as pretty JSON to <dir>/<command>.manifest.json.
void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::ordered_json& settings);

/// Markdown files under each input (files are taken as-is, directories are
/// walked recursively), sorted, with the label and doc id derived from the
/// path: the label is `label_override` if given, otherwise the first
/// directory under a directory input (or the directory itself for files
/// directly inside it), otherwise the parent directory of a file input.
struct MarkdownSource {
  fs::path path;
  std::string doc_id;
  std::string label;
};
std::vector<MarkdownSource> collect_markdown(const std::vector<fs::path>& inputs,
                                             const std::optional<std::string>& label_override);

// --- chunk ------------------------------------------------------------------

struct ChunkOptions {
  std::vector<fs::path> inputs;
  fs::path out_dir;
  std::size_t max_tokens = 512;
  int split_level = 2;
  std::string tokenizer = std::string(CodePointCounter::kId);
  std::optional<std::string> label;
};

struct ChunkSummary {
  std::vector<fs::path> files;
  std::size_t chunk_count = 0;
  CorpusStats stats;
};

ChunkSummary cmd_chunk(const ChunkOptions& options, std::ostream& log);

// --- stats ------------------------------------------------------------------

struct StatsOptions {
  std::vector<fs::path> inputs;  // chunk JSONL files or directories of them
  std::string tokenizer = std::string(CodePointCounter::kId);
};

CorpusStats cmd_stats(const StatsOptions& options);

// --- augment ----------------------------------------------------------------

enum class AugmentMode : std::uint8_t { Bias, Shuffle, Prompts, Mdqa };
AugmentMode parse_augment_mode(std::string_view s);
std::string_view to_string(AugmentMode m);

struct AugmentOptions {
  AugmentMode mode = AugmentMode::Shuffle;
  fs::path exam;
  fs::path responses;               // bias: output of `generate --mode bias`
  fs::path records;                 // prompts: SFT JSONL to expand
  std::vector<fs::path> markdown;   // mdqa
  fs::path out_dir;
  std::uint64_t seed = 0;
  int shuffles = kDefaultShufflesPerQuestion;
  std::vector<PromptVariantId> variants;  // prompts; empty means all
  ChunkOptions chunking;            // mdqa
  std::optional<std::string> cpt_label;  // mdqa: keep only documents with this label
};

struct AugmentSummary {
  std::size_t sft = 0;
  std::size_t dpo = 0;
  std::size_t warnings = 0;
  fs::path sft_file;
  fs::path dpo_file;
};

AugmentSummary cmd_augment(const AugmentOptions& options, std::ostream& log);

// --- generate ---------------------------------------------------------------

enum class GenerateMode : std::uint8_t { Answer, Bias };
GenerateMode parse_generate_mode(std::string_view s);

/// One line of a generated-response file.
struct ResponseRecord {
  std::string question_id;
  std::string backend_id;
  PromptVariantId variant = PromptVariantId::CoT;
  std::optional<int> target;  // bias mode only
  std::string request_hash;
  std::string text;
  std::string error;
  bool cached = false;  // not serialized: re-runs must produce identical files
};

nlohmann::ordered_json response_to_json(const ResponseRecord& r);
ResponseRecord response_from_json(const nlohmann::ordered_json& j);

struct GenerateOptions {
  GenerateMode mode = GenerateMode::Answer;
  fs::path exam;
  std::vector<BackendSpec> backends;
  std::vector<PromptVariantId> variants;  // answer mode; empty means CoT + multi-LLM zero-shot
  fs::path out_file;
  std::optional<std::uint64_t> seed = 0;
  double temperature = 0.7;
  std::size_t max_output_tokens = 2048;
  std::size_t parallelism = 8;
};

struct GenerateSummary {
  std::vector<ResponseRecord> records;
  std::size_t cached = 0;
  std::size_t errors = 0;
};

GenerateSummary cmd_generate(const GenerateOptions& options, Gateway& gateway, std::ostream& log);

// --- pair-dpo ---------------------------------------------------------------

struct PairOptions {
  fs::path responses;
  fs::path exam;
  std::size_t pair_cap = kDefaultPairCap;
  fs::path out_file;
};

struct PairSummary {
  std::size_t pairs = 0;
  std::size_t questions_without_pairs = 0;
};

PairSummary cmd_pair_dpo(const PairOptions& options, std::ostream& log);

// --- eval / report ----------------------------------------------------------

struct EvalCommandOptions {
  fs::path exam;
  BackendSpec backend;
  PromptVariantId variant = PromptVariantId::CoT;
  fs::path out_dir;
  EvalOptions eval;
  ReportFormat format = ReportFormat::Table;
};

struct EvalSummary {
  EvalRun run;
  fs::path report_file;
  fs::path audit_file;
  std::string rendered;
};

EvalSummary cmd_eval(const EvalCommandOptions& options, Gateway& gateway, std::ostream& log);

std::string cmd_report(const std::vector<fs::path>& report_files, ReportFormat format);

}  // namespace examforge::cli
