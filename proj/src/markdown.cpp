#include "examforge/markdown.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace examforge {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (is_space(s.front()) || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (is_space(s.back()) || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

std::size_t leading_spaces(std::string_view line) {
  std::size_t n = 0;
  while (n < line.size() && line[n] == ' ') ++n;
  return n;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty() && !text.empty() && text.back() == '\n') lines.pop_back();
  return lines;
}

struct AtxHeader {
  int level;
  std::string text;
};

std::optional<AtxHeader> parse_atx(std::string_view line) {
  std::size_t indent = leading_spaces(line);
  if (indent > 3) return std::nullopt;
  line.remove_prefix(indent);
  int level = 0;
  while (static_cast<std::size_t>(level) < line.size() && line[level] == '#') ++level;
  if (level < 1 || level > 6) return std::nullopt;
  std::string_view rest = line.substr(level);
  if (!rest.empty() && rest.front() != ' ' && rest.front() != '\t') return std::nullopt;
  rest = trim(rest);
  // Optional closing sequence: "## Title ##".
  std::size_t hashes = 0;
  while (hashes < rest.size() && rest[rest.size() - 1 - hashes] == '#') ++hashes;
  if (hashes == rest.size()) {
    rest = {};
  } else if (hashes > 0 && is_space(rest[rest.size() - 1 - hashes])) {
    rest = trim(rest.substr(0, rest.size() - hashes));
  }
  return AtxHeader{level, std::string(rest)};
}

// 0 when the line is not a setext underline, else the header level.
int setext_level(std::string_view line) {
  if (leading_spaces(line) > 3) return 0;
  line = trim(line);
  if (line.empty()) return 0;
  const char c = line.front();
  if (c != '=' && c != '-') return 0;
  if (!std::all_of(line.begin(), line.end(), [c](char x) { return x == c; })) return 0;
  if (c == '-' && line.size() < 2) return 0;
  return c == '=' ? 1 : 2;
}

struct Fence {
  char ch;
  std::size_t len;
};

std::optional<Fence> parse_fence(std::string_view line) {
  std::size_t indent = leading_spaces(line);
  if (indent > 3) return std::nullopt;
  line.remove_prefix(indent);
  if (line.empty() || (line.front() != '`' && line.front() != '~')) return std::nullopt;
  const char c = line.front();
  std::size_t n = 0;
  while (n < line.size() && line[n] == c) ++n;
  if (n < 3) return std::nullopt;
  return Fence{c, n};
}

bool closes_fence(std::string_view line, const Fence& open) {
  auto f = parse_fence(line);
  if (!f || f->ch != open.ch || f->len < open.len) return false;
  return trim(trim(line).substr(f->len)).empty();
}

bool is_list_item(std::string_view line) {
  if (leading_spaces(line) >= 2) return false;
  line = trim(line);
  if (line.size() >= 2 && (line[0] == '-' || line[0] == '*' || line[0] == '+') &&
      (line[1] == ' ' || line[1] == '\t'))
    return true;
  std::size_t digits = 0;
  while (digits < line.size() && digits < 9 && line[digits] >= '0' && line[digits] <= '9') ++digits;
  return digits > 0 && digits + 1 < line.size() && (line[digits] == '.' || line[digits] == ')') &&
         (line[digits + 1] == ' ' || line[digits + 1] == '\t');
}

bool ends_sentence(std::string_view line) {
  line = trim(line);
  if (line.empty()) return false;
  for (std::string_view end : {".", "!", "?", "\xE3\x80\x82" /* 。 */, "\xEF\xBC\x81" /* ！ */,
                               "\xEF\xBC\x9F" /* ？ */, "\xE2\x80\xA6" /* … */}) {
    if (line.ends_with(end)) return true;
  }
  return false;
}

struct Line {
  std::string_view text;
  std::size_t source_line;
};

std::string join_lines(const std::vector<Line>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i].text;
  }
  return out;
}

class Splitter {
 public:
  Splitter(const Chunk& prototype, const ChunkConfig& config, std::vector<Chunk>& out)
      : prototype_(prototype), config_(config), out_(out) {}

  void split(const HeaderPath& ctx, std::vector<Block> blocks) {
    if (blocks.empty()) return;
    if (fits(ctx, blocks)) {
      emit(ctx, std::move(blocks), false);
      return;
    }
    if (blocks.size() == 1) {
      if (blocks.front().is_header() || blocks.front().opaque) {
        emit(ctx, std::move(blocks), true);
      } else {
        split_paragraph(ctx, blocks.front());
      }
      return;
    }

    const Block& first = blocks.front();
    if (first.is_header()) {
      bool owns_rest = std::none_of(blocks.begin() + 1, blocks.end(), [&](const Block& b) {
        return b.is_header() && b.level <= first.level;
      });
      if (owns_rest) {
        HeaderPath inner = ctx;
        inner.push({first.level, first.text, first.source_line});
        split(inner, std::vector<Block>(blocks.begin() + 1, blocks.end()));
        return;
      }
    }

    int min_level = 7;
    for (const Block& b : blocks) {
      if (b.is_header()) min_level = std::min(min_level, b.level);
    }
    if (min_level <= 6) {
      std::vector<std::vector<Block>> segments(1);
      for (Block& b : blocks) {
        if (b.is_header() && b.level == min_level && !segments.back().empty()) segments.emplace_back();
        segments.back().push_back(std::move(b));
      }
      for (auto& seg : segments) split(ctx, std::move(seg));
      return;
    }

    // Only content blocks remain: pack whole paragraphs greedily.
    std::vector<Block> current;
    for (Block& b : blocks) {
      std::vector<Block> candidate = current;
      candidate.push_back(b);
      if (fits(ctx, candidate)) {
        current = std::move(candidate);
        continue;
      }
      if (!current.empty()) emit(ctx, std::exchange(current, {}), false);
      if (fits(ctx, {b})) {
        current.push_back(std::move(b));
      } else if (b.opaque) {
        emit(ctx, {std::move(b)}, true);
      } else {
        split_paragraph(ctx, b);
      }
    }
    if (!current.empty()) emit(ctx, std::move(current), false);
  }

 private:
  enum class Boundary { ListItem, Sentence };

  void split_paragraph(const HeaderPath& ctx, const Block& block) {
    std::vector<Line> lines;
    std::size_t n = block.source_line;
    for (std::string_view l : split_lines(block.text)) lines.push_back({l, n++});
    split_lines_at(ctx, lines, Boundary::ListItem);
  }

  void split_lines_at(const HeaderPath& ctx, const std::vector<Line>& lines, Boundary boundary) {
    std::vector<std::vector<Line>> pieces(1);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      bool cut = false;
      if (i > 0) {
        cut = boundary == Boundary::ListItem ? is_list_item(lines[i].text)
                                             : ends_sentence(lines[i - 1].text);
      }
      if (cut && !pieces.back().empty()) pieces.emplace_back();
      pieces.back().push_back(lines[i]);
    }

    if (pieces.size() == 1) {
      if (boundary == Boundary::ListItem) {
        split_lines_at(ctx, lines, Boundary::Sentence);
      } else {
        emit(ctx, {as_block(lines)}, true);
      }
      return;
    }

    std::vector<Line> current;
    for (const auto& piece : pieces) {
      std::vector<Line> candidate = current;
      candidate.insert(candidate.end(), piece.begin(), piece.end());
      if (fits(ctx, {as_block(candidate)})) {
        current = std::move(candidate);
        continue;
      }
      if (!current.empty()) emit(ctx, {as_block(std::exchange(current, {}))}, false);
      if (fits(ctx, {as_block(piece)})) {
        current = piece;
      } else if (boundary == Boundary::ListItem) {
        split_lines_at(ctx, piece, Boundary::Sentence);
      } else {
        emit(ctx, {as_block(piece)}, true);
      }
    }
    if (!current.empty()) emit(ctx, {as_block(current)}, false);
  }

  static Block as_block(const std::vector<Line>& lines) {
    return Block::content(join_lines(lines), lines.front().source_line);
  }

  bool fits(const HeaderPath& ctx, const std::vector<Block>& blocks) const {
    return config_.tokenizer->count(render_chunk_text(ctx, blocks)) <= config_.max_tokens;
  }

  void emit(const HeaderPath& ctx, std::vector<Block> blocks, bool overflow) {
    Chunk c;
    c.context = ctx;
    c.blocks = std::move(blocks);
    c.body = render_blocks(c.blocks);
    c.token_count = config_.tokenizer->count(c.rendered());
    c.doc_id = prototype_.doc_id;
    c.label = prototype_.label;
    c.ordinal = prototype_.ordinal + out_.size();
    c.atomic_overflow = overflow && c.token_count > config_.max_tokens;
    out_.push_back(std::move(c));
  }

  const Chunk& prototype_;
  const ChunkConfig& config_;
  std::vector<Chunk>& out_;
};

Chunk make_chunk(HeaderPath ctx, std::vector<Block> blocks, const ChunkConfig& config) {
  Chunk c;
  c.context = std::move(ctx);
  c.blocks = std::move(blocks);
  c.body = render_blocks(c.blocks);
  c.token_count = config.tokenizer->count(c.rendered());
  c.doc_id = config.doc_id;
  c.label = config.doc_label;
  return c;
}

}  // namespace

Block Block::header(int level, std::string text, std::size_t line) {
  Block b;
  b.kind = Kind::Header;
  b.level = level;
  b.text = std::move(text);
  b.source_line = line;
  return b;
}

Block Block::content(std::string text, std::size_t line, bool opaque) {
  Block b;
  b.kind = Kind::Content;
  b.text = std::move(text);
  b.source_line = line;
  b.opaque = opaque;
  return b;
}

void HeaderPath::push(HeaderEntry entry) {
  while (!entries.empty() && entries.back().level >= entry.level) entries.pop_back();
  entries.push_back(std::move(entry));
}

HeaderPath HeaderPath::ancestors_of(int level) const {
  HeaderPath out;
  for (const auto& e : entries) {
    if (e.level < level) out.entries.push_back(e);
  }
  return out;
}

std::vector<std::string> HeaderPath::lines() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(header_line(e.level, e.text));
  return out;
}

std::string header_line(int level, std::string_view text) {
  std::string out(static_cast<std::size_t>(level), '#');
  if (!text.empty()) {
    out += ' ';
    out += text;
  }
  return out;
}

std::vector<Block> parse_outline(std::string_view text) {
  std::vector<Block> blocks;
  const auto lines = split_lines(text);

  std::vector<Line> run;
  auto flush = [&] {
    if (run.empty()) return;
    blocks.push_back(Block::content(join_lines(run), run.front().source_line));
    run.clear();
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];

    if (auto fence = parse_fence(line)) {
      flush();
      std::vector<Line> fenced{{line, i}};
      std::size_t j = i + 1;
      for (; j < lines.size(); ++j) {
        fenced.push_back({lines[j], j});
        if (closes_fence(lines[j], *fence)) break;
      }
      while (!fenced.empty() && is_blank(fenced.back().text)) fenced.pop_back();
      blocks.push_back(Block::content(join_lines(fenced), i, true));
      i = std::min(j, lines.size() - 1);
      continue;
    }
    if (is_blank(line)) {
      flush();
      continue;
    }
    if (auto atx = parse_atx(line)) {
      flush();
      blocks.push_back(Block::header(atx->level, std::move(atx->text), i));
      continue;
    }
    if (int level = setext_level(line); level > 0 && run.size() == 1) {
      blocks.push_back(Block::header(level, std::string(trim(run.front().text)), run.front().source_line));
      run.clear();
      continue;
    }
    run.push_back({line, i});
  }
  flush();
  return blocks;
}

void ChunkConfig::validate() const {
  if (max_tokens == 0) throw std::invalid_argument("max_tokens must be > 0");
  if (primary_split_level < 1 || primary_split_level > 6)
    throw std::invalid_argument("primary_split_level must be in 1..6");
  if (!tokenizer) throw std::invalid_argument("chunk config has no tokenizer");
}

std::string render_blocks(const std::vector<Block>& blocks) {
  std::string out;
  const Block* prev = nullptr;
  for (const Block& b : blocks) {
    if (prev) out += (prev->is_header() && !b.is_header()) ? "\n" : "\n\n";
    out += b.is_header() ? header_line(b.level, b.text) : b.text;
    prev = &b;
  }
  return out;
}

std::string render_chunk_text(const HeaderPath& context, const std::vector<Block>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < context.entries.size(); ++i) {
    if (i) out += "\n\n";
    out += header_line(context.entries[i].level, context.entries[i].text);
  }
  if (!blocks.empty()) {
    if (!out.empty()) out += blocks.front().is_header() ? "\n\n" : "\n";
    out += render_blocks(blocks);
  }
  return out;
}

std::string Chunk::rendered() const {
  std::string out;
  for (std::size_t i = 0; i < context.entries.size(); ++i) {
    if (i) out += "\n\n";
    out += header_line(context.entries[i].level, context.entries[i].text);
  }
  if (!body.empty()) {
    if (!out.empty()) out += (!blocks.empty() && blocks.front().is_header()) ? "\n\n" : "\n";
    out += body;
  }
  return out;
}

std::vector<Chunk> chunk_primary(const std::vector<Block>& blocks, const ChunkConfig& config) {
  config.validate();
  const int split_level = config.primary_split_level;

  std::vector<Chunk> chunks;
  HeaderPath stack;
  std::optional<std::pair<HeaderPath, std::vector<Block>>> pending;

  auto flush = [&] {
    if (pending && !pending->second.empty()) {
      chunks.push_back(make_chunk(std::move(pending->first), std::move(pending->second), config));
      chunks.back().ordinal = chunks.size() - 1;
    }
    pending.reset();
  };

  for (const Block& b : blocks) {
    if (b.is_header() && b.level <= split_level) {
      flush();
      HeaderPath before = stack.ancestors_of(b.level);
      stack.push({b.level, b.text, b.source_line});
      if (b.level < split_level) {
        pending.emplace(stack, std::vector<Block>{});
      } else {
        pending.emplace(std::move(before), std::vector<Block>{b});
      }
      continue;
    }
    if (!pending) pending.emplace(stack, std::vector<Block>{});
    pending->second.push_back(b);
    if (b.is_header()) stack.push({b.level, b.text, b.source_line});
  }
  flush();
  return chunks;
}

std::vector<Chunk> split_oversized(const Chunk& chunk, const ChunkConfig& config) {
  config.validate();
  if (chunk.token_count <= config.max_tokens || chunk.blocks.empty()) return {chunk};
  std::vector<Chunk> out;
  Splitter(chunk, config, out).split(chunk.context, chunk.blocks);
  return out;
}

std::vector<Chunk> chunk_document(std::string_view text, const ChunkConfig& config) {
  config.validate();
  std::vector<Chunk> out;
  for (const Chunk& primary : chunk_primary(parse_outline(text), config)) {
    for (Chunk& c : split_oversized(primary, config)) {
      c.ordinal = out.size();
      out.push_back(std::move(c));
    }
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<Chunk>& chunks, const TokenCounter& counter) {
  CorpusStats stats;
  for (const Chunk& c : chunks) {
    const std::uint64_t n = counter.count(c.body);
    stats.per_label[c.label] += n;
    stats.total += n;
  }
  return stats;
}

std::string format_thousands(std::uint64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::string render_stats_table(const CorpusStats& stats) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& [label, n] : stats.per_label) rows.emplace_back(label.empty() ? "(unlabeled)" : label, format_thousands(n));
  rows.emplace_back("Total", format_thousands(stats.total));

  std::size_t w0 = std::string_view("Label").size();
  std::size_t w1 = std::string_view("Number of Tokens").size();
  for (const auto& [a, b] : rows) {
    w0 = std::max(w0, count_code_points(a));
    w1 = std::max(w1, b.size());
  }
  auto row = [&](std::string_view a, std::string_view b) {
    std::string line(a);
    line.append(w0 - count_code_points(a) + 2, ' ');
    line.append(w1 - b.size(), ' ');
    line += b;
    return line + "\n";
  };
  std::string out = row("Label", "Number of Tokens");
  out += std::string(w0 + 2 + w1, '-') + "\n";
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) out += row(rows[i].first, rows[i].second);
  out += std::string(w0 + 2 + w1, '-') + "\n";
  out += row(rows.back().first, rows.back().second);
  return out;
}

nlohmann::ordered_json chunk_to_json(const Chunk& c) {
  nlohmann::ordered_json j;
  j["doc_id"] = c.doc_id;
  j["ordinal"] = c.ordinal;
  j["context"] = c.context.lines();
  j["body"] = c.body;
  j["token_count"] = c.token_count;
  j["atomic_overflow"] = c.atomic_overflow;
  j["label"] = c.label;
  return j;
}

Chunk chunk_from_json(const nlohmann::ordered_json& j) {
  Chunk c;
  c.doc_id = j.at("doc_id").get<std::string>();
  c.ordinal = j.at("ordinal").get<std::size_t>();
  for (const auto& line : j.at("context")) {
    auto atx = parse_atx(line.get<std::string>());
    if (!atx) throw std::invalid_argument("chunk context line is not a header: " + line.get<std::string>());
    c.context.entries.push_back({atx->level, atx->text, 0});
  }
  c.body = j.at("body").get<std::string>();
  c.blocks = parse_outline(c.body);
  c.token_count = j.at("token_count").get<std::size_t>();
  c.atomic_overflow = j.at("atomic_overflow").get<bool>();
  c.label = j.value("label", std::string{});
  return c;
}

}  // namespace examforge
