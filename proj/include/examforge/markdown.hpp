#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "examforge/tokenizer.hpp"
#include "json.hpp"

namespace examforge {

// ---------------------------------------------------------------------------
// Outline
// ---------------------------------------------------------------------------

/// One structural unit of a markdown document: an ATX (or normalized setext)
/// header, or a run of non-blank lines. Fenced code is kept whole and marked
/// opaque so chunking never splits inside it.
struct Block {
  enum class Kind : std::uint8_t { Header, Content };

  Kind kind = Kind::Content;
  int level = 0;  // 1..6 for headers, 0 for content
  std::string text;
  std::size_t source_line = 0;  // zero-based line of the first source line
  bool opaque = false;

  static Block header(int level, std::string text, std::size_t line);
  static Block content(std::string text, std::size_t line, bool opaque = false);

  bool is_header() const { return kind == Kind::Header; }
  bool operator==(const Block&) const = default;
};

struct HeaderEntry {
  int level = 1;
  std::string text;
  std::size_t source_line = 0;

  bool operator==(const HeaderEntry&) const = default;
};

/// Stack of ancestor headers. Levels strictly increase from front to back.
struct HeaderPath {
  std::vector<HeaderEntry> entries;

  /// Pops every entry at or below `entry.level`, then appends it.
  void push(HeaderEntry entry);
  /// Entries with level strictly less than `level`.
  HeaderPath ancestors_of(int level) const;

  bool empty() const { return entries.empty(); }
  std::vector<std::string> lines() const;
  bool operator==(const HeaderPath&) const = default;
};

/// "## Title" for (2, "Title").
std::string header_line(int level, std::string_view text);

/// Splits markdown into header and content blocks in document order.
/// Any text parses; a document with no headers yields only content blocks.
std::vector<Block> parse_outline(std::string_view text);

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

struct ChunkConfig {
  std::size_t max_tokens = 512;
  int primary_split_level = 2;
  TokenCounterPtr tokenizer = default_token_counter();
  std::string doc_label;
  std::string doc_id;

  /// Throws std::invalid_argument if max_tokens == 0 or the split level is
  /// outside 1..6.
  void validate() const;
};

struct Chunk {
  HeaderPath context;
  std::vector<Block> blocks;
  std::string body;
  std::size_t token_count = 0;
  std::string doc_id;
  std::size_t ordinal = 0;
  bool atomic_overflow = false;
  std::string label;

  /// Context header lines followed by the body; this is what token_count
  /// measures.
  std::string rendered() const;
  bool operator==(const Chunk&) const = default;
};

/// Joins blocks the way the chunk text is laid out: a header directly followed
/// by its content is separated by one newline, every other boundary by a
/// blank line.
std::string render_blocks(const std::vector<Block>& blocks);
std::string render_chunk_text(const HeaderPath& context, const std::vector<Block>& blocks);

/// Starts a chunk at every header of `primary_split_level`; shallower headers
/// become context, deeper headers stay in the body. Content before the first
/// split header forms its own chunk.
std::vector<Chunk> chunk_primary(const std::vector<Block>& blocks, const ChunkConfig& config);

/// Splits a chunk over budget: first by successively deeper headers, then
/// paragraphs, then list items, then sentence-ending lines. Lines are never
/// cut; a piece that still does not fit is emitted whole with
/// atomic_overflow set.
std::vector<Chunk> split_oversized(const Chunk& chunk, const ChunkConfig& config);

/// parse_outline + chunk_primary + split_oversized, with dense ordinals.
std::vector<Chunk> chunk_document(std::string_view text, const ChunkConfig& config);

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

struct CorpusStats {
  std::map<std::string, std::uint64_t> per_label;
  std::uint64_t total = 0;

  bool operator==(const CorpusStats&) const = default;
};

/// Sums body token counts per label. Context headers repeated across chunks
/// are not counted.
CorpusStats corpus_stats(const std::vector<Chunk>& chunks, const TokenCounter& counter);

/// Per-label rows plus a total row, with thousands separators.
std::string render_stats_table(const CorpusStats& stats);
std::string format_thousands(std::uint64_t value);

nlohmann::ordered_json chunk_to_json(const Chunk& chunk);
/// Rebuilds a chunk from its JSON line. Body blocks are re-parsed from the
/// body text, so their source_line values are relative to the body.
Chunk chunk_from_json(const nlohmann::ordered_json& j);

}  // namespace examforge
