// examforge: command-line front end for the exam-preparation pipeline.
//
//   examforge chunk     <inputs...> --out DIR
//   examforge stats     <chunk files or dirs...>
//   examforge augment   --mode bias|shuffle|prompts|mdqa ...
//   examforge generate  --mode answer|bias --exam FILE --out FILE
//   examforge pair-dpo  --responses FILE --exam FILE --out FILE
//   examforge eval      --exam FILE --backend ID --variant NAME --out DIR
//   examforge report    <report.json...> [--format table|csv]
//
// Settings resolve as: command-line flag, then --config file, then built-in
// default. Exit status is 1 on hard errors only.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "examforge/commands.hpp"
#include "examforge/dataset.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace examforge;

namespace {

struct Config {
  fs::path path;
  nlohmann::json doc = nlohmann::json::object();

  static Config load(const std::string& path) {
    Config c;
    if (path.empty()) return c;
    c.path = path;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path);
    c.doc = nlohmann::json::parse(in);
    if (!c.doc.is_object()) throw std::invalid_argument("config must be a JSON object");
    return c;
  }

  template <typename T>
  T pick(const CLI::Option* flag, const T& flag_value, const char* key, const T& fallback) const {
    if (flag && flag->count() > 0) return flag_value;
    if (doc.contains(key)) return doc.at(key).get<T>();
    return fallback;
  }

  std::vector<BackendSpec> backends() const {
    if (doc.contains("backends")) return load_backends(path);
    if (doc.contains("backends_file")) {
      fs::path f = doc.at("backends_file").get<std::string>();
      if (f.is_relative()) f = path.parent_path() / f;
      return load_backends(f);
    }
    return {};
  }
};

std::vector<BackendSpec> select_backends(const std::vector<BackendSpec>& all, const std::vector<std::string>& ids) {
  if (ids.empty()) return all;
  std::vector<BackendSpec> out;
  for (const auto& id : ids) {
    auto it = std::find_if(all.begin(), all.end(), [&](const BackendSpec& b) { return b.id == id; });
    if (it == all.end()) throw std::invalid_argument("backend not in config: " + id);
    out.push_back(*it);
  }
  return out;
}

std::vector<PromptVariantId> parse_variants(const std::vector<std::string>& names) {
  std::vector<PromptVariantId> out;
  for (const auto& n : names) out.push_back(parse_prompt_variant(n));
  return out;
}

ReportFormat parse_format(const std::string& s) {
  if (s == "table") return ReportFormat::Table;
  if (s == "csv") return ReportFormat::Csv;
  throw std::invalid_argument("unknown report format: " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exam-preparation data pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON settings file")->check(CLI::ExistingFile);

  // Shared flag storage; each subcommand registers the ones it uses.
  std::vector<std::string> inputs;
  std::string out;
  std::string label;
  std::size_t max_tokens = 512;
  int split_level = 2;
  std::string tokenizer = "codepoint3";
  std::uint64_t seed = 0;
  int shuffles = kDefaultShufflesPerQuestion;
  std::size_t pair_cap = kDefaultPairCap;
  std::string mode;
  std::string exam;
  std::string responses;
  std::string records;
  std::vector<std::string> backend_ids;
  std::vector<std::string> variant_names;
  double temperature = 0.0;
  std::string format = "table";

  auto* chunk = app.add_subcommand("chunk", "Split markdown into token-bounded chunks");
  chunk->add_option("inputs", inputs, "Markdown files or directories")->required();
  chunk->add_option("--out", out, "Output directory")->required();
  auto* chunk_label = chunk->add_option("--label", label, "Label for every input (default: directory name)");
  auto* chunk_max = chunk->add_option("--max-tokens", max_tokens, "Token budget per chunk");
  auto* chunk_level = chunk->add_option("--split-level", split_level, "Header level that starts a chunk");
  auto* chunk_tok = chunk->add_option("--tokenizer", tokenizer, "codepoint3 or whitespace");

  auto* stats = app.add_subcommand("stats", "Per-label token totals of chunk files");
  stats->add_option("inputs", inputs, "Chunk JSONL files or directories")->required();
  auto* stats_tok = stats->add_option("--tokenizer", tokenizer, "codepoint3 or whitespace");

  auto* augment = app.add_subcommand("augment", "Build SFT and DPO records");
  augment->add_option("--mode", mode, "bias, shuffle, prompts or mdqa")
      ->required()
      ->check(CLI::IsMember({"bias", "shuffle", "prompts", "mdqa"}));
  augment->add_option("--exam", exam, "Exam JSON (bias, shuffle)");
  augment->add_option("--responses", responses, "Output of `generate --mode bias` (bias)");
  augment->add_option("--records", records, "SFT JSONL to expand (prompts)");
  augment->add_option("--inputs", inputs, "Markdown files or directories (mdqa)");
  augment->add_option("--out", out, "Output directory")->required();
  auto* aug_seed = augment->add_option("--seed", seed, "Base shuffle seed");
  auto* aug_shuffles = augment->add_option("--shuffles", shuffles, "Shuffles per question");
  auto* aug_variants = augment->add_option("--variant", variant_names, "Prompt variant (repeatable)");
  auto* aug_label = augment->add_option("--label", label, "Only documents with this label (mdqa)");
  auto* aug_max = augment->add_option("--max-tokens", max_tokens, "Token budget per chunk (mdqa)");
  auto* aug_tok = augment->add_option("--tokenizer", tokenizer, "codepoint3 or whitespace (mdqa)");

  auto* generate = app.add_subcommand("generate", "Query backends for exam answers or biased reasons");
  generate->add_option("--mode", mode, "answer or bias")->check(CLI::IsMember({"answer", "bias"}));
  generate->add_option("--exam", exam, "Exam JSON")->required();
  generate->add_option("--out", out, "Output JSONL")->required();
  generate->add_option("--backend", backend_ids, "Backend id (repeatable; default: all)");
  auto* gen_variants = generate->add_option("--variant", variant_names, "Prompt variant (repeatable)");
  auto* gen_seed = generate->add_option("--seed", seed, "Request seed");
  auto* gen_temp = generate->add_option("--temperature", temperature, "Sampling temperature");

  auto* pair = app.add_subcommand("pair-dpo", "Pair validated responses into DPO records");
  pair->add_option("--responses", responses, "Output of `generate --mode answer`")->required();
  pair->add_option("--exam", exam, "Exam JSON")->required();
  pair->add_option("--out", out, "Output JSONL")->required();
  auto* pair_cap_opt = pair->add_option("--pair-cap", pair_cap, "Maximum pairs per question");

  auto* eval = app.add_subcommand("eval", "Score a backend on a mock exam");
  eval->add_option("--exam", exam, "Exam JSON")->required();
  eval->add_option("--backend", backend_ids, "Backend id")->required()->expected(1);
  eval->add_option("--variant", variant_names, "Prompt variant")->expected(1);
  eval->add_option("--out", out, "Output directory")->required();
  auto* eval_seed = eval->add_option("--seed", seed, "Request seed");
  eval->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

  auto* report = app.add_subcommand("report", "Combine report JSON files into a table");
  report->add_option("inputs", inputs, "Report JSON files")->required();
  report->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

  CLI11_PARSE(app, argc, argv);

  try {
    const Config config = Config::load(config_path);
    std::vector<fs::path> paths(inputs.begin(), inputs.end());

    if (chunk->parsed()) {
      cli::ChunkOptions o;
      o.inputs = paths;
      o.out_dir = out;
      o.max_tokens = config.pick(chunk_max, max_tokens, "max_tokens", o.max_tokens);
      o.split_level = config.pick(chunk_level, split_level, "split_level", o.split_level);
      o.tokenizer = config.pick(chunk_tok, tokenizer, "tokenizer", o.tokenizer);
      if (chunk_label->count() > 0) o.label = label;
      const auto s = cli::cmd_chunk(o, std::cerr);
      std::cout << render_stats_table(s.stats);
      std::cerr << s.chunk_count << " chunks in " << s.files.size() << " file(s)\n";
    } else if (stats->parsed()) {
      cli::StatsOptions o;
      o.inputs = paths;
      o.tokenizer = config.pick(stats_tok, tokenizer, "tokenizer", o.tokenizer);
      std::cout << render_stats_table(cli::cmd_stats(o));
    } else if (augment->parsed()) {
      cli::AugmentOptions o;
      o.mode = cli::parse_augment_mode(mode);
      o.exam = exam;
      o.responses = responses;
      o.records = records;
      o.markdown = paths;
      o.out_dir = out;
      o.seed = config.pick(aug_seed, seed, "seed", o.seed);
      o.shuffles = config.pick(aug_shuffles, shuffles, "shuffles", o.shuffles);
      o.variants = parse_variants(config.pick(aug_variants, variant_names, "variants", std::vector<std::string>{}));
      o.chunking.max_tokens = config.pick(aug_max, max_tokens, "max_tokens", o.chunking.max_tokens);
      o.chunking.split_level = config.pick<int>(nullptr, 0, "split_level", o.chunking.split_level);
      o.chunking.tokenizer = config.pick(aug_tok, tokenizer, "tokenizer", o.chunking.tokenizer);
      if (aug_label->count() > 0) o.cpt_label = label;
      const auto s = cli::cmd_augment(o, std::cerr);
      std::cerr << s.sft << " SFT, " << s.dpo << " DPO records, " << s.warnings << " warning(s)\n";
    } else if (generate->parsed() || eval->parsed()) {
      GatewayOptions gopts;
      gopts.cache_dir = config.pick<std::string>(nullptr, "", "cache_dir", "");
      Gateway gateway(gopts);
      const auto all = config.backends();
      if (all.empty()) throw std::invalid_argument("no backends: pass --config with a \"backends\" list");
      const auto backends = select_backends(all, backend_ids);

      if (generate->parsed()) {
        cli::GenerateOptions o;
        o.mode = mode.empty() ? cli::GenerateMode::Answer : cli::parse_generate_mode(mode);
        o.exam = exam;
        o.out_file = out;
        o.backends = backends;
        o.variants = parse_variants(config.pick(gen_variants, variant_names, "variants", std::vector<std::string>{}));
        o.seed = config.pick(gen_seed, seed, "seed", std::uint64_t{0});
        o.temperature = config.pick(gen_temp, temperature, "temperature", o.temperature);
        o.max_output_tokens = config.pick<std::size_t>(nullptr, 0, "max_output_tokens", o.max_output_tokens);
        o.parallelism = config.pick<std::size_t>(nullptr, 0, "parallelism", o.parallelism);
        const auto s = cli::cmd_generate(o, gateway, std::cerr);
        std::cerr << s.records.size() << " responses (" << s.cached << " cached, " << s.errors << " failed)\n";
      } else {
        cli::EvalCommandOptions o;
        o.exam = exam;
        o.backend = backends.front();
        o.variant = variant_names.empty() ? PromptVariantId::CoT : parse_prompt_variant(variant_names.front());
        o.out_dir = out;
        o.eval.seed = config.pick(eval_seed, seed, "seed", std::uint64_t{0});
        o.eval.max_output_tokens = config.pick<std::size_t>(nullptr, 0, "max_output_tokens", o.eval.max_output_tokens);
        o.eval.parallelism = config.pick<std::size_t>(nullptr, 0, "parallelism", o.eval.parallelism);
        o.format = parse_format(format);
        const auto s = cli::cmd_eval(o, gateway, std::cerr);
        std::cout << s.rendered;
      }
    } else if (pair->parsed()) {
      cli::PairOptions o;
      o.responses = responses;
      o.exam = exam;
      o.out_file = out;
      o.pair_cap = config.pick(pair_cap_opt, pair_cap, "pair_cap", o.pair_cap);
      const auto s = cli::cmd_pair_dpo(o, std::cerr);
      std::cerr << s.pairs << " pairs, " << s.questions_without_pairs << " question(s) without a pair\n";
    } else if (report->parsed()) {
      std::cout << cli::cmd_report(paths, parse_format(format));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
