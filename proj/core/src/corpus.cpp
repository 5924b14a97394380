#include "sugg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sugg/error.hpp"
#include "sugg/rng.hpp"
#include "sugg/text.hpp"

namespace sugg {
namespace {

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
  }
  if (c >= 0xA1 && c <= 0xBF) return c != 0xAA && c != 0xB5 && c != 0xBA;
  if (c == 0xD7 || c == 0xF7) return true;
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3000 && c <= 0x303F);
}

bool is_alnum(char32_t c) { return text::is_letter(c) || text::is_digit(c); }

bool is_sentence_end(char32_t c) { return c == '.' || c == '!' || c == '?'; }

// Punctuation allowed inside a word when both neighbours qualify.
bool joins(char32_t c, char32_t prev, char32_t next) {
  if (c == '\'' || c == 0x2019 || c == '-') return is_alnum(prev) && is_alnum(next);
  if (c == '.' || c == ',') return text::is_digit(prev) && text::is_digit(next);
  return false;
}

void split_chunk(const std::vector<char32_t>& cs, std::vector<Token>& out) {
  std::string word;
  const auto flush = [&] {
    if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
  };
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const char32_t c = cs[i];
    if (is_punct(c)) {
      const char32_t prev = i > 0 ? cs[i - 1] : U' ';
      const char32_t next = i + 1 < cs.size() ? cs[i + 1] : U' ';
      if (!word.empty() && joins(c, prev, next)) {
        text::append_utf8(word, c);
        continue;
      }
      flush();
      std::string p;
      text::append_utf8(p, c);
      out.push_back(std::move(p));
    } else {
      text::append_utf8(word, c);
    }
  }
  flush();
}

// Appends the tokens of `raw`; with close_last the final sentence gets EOS.
void tokenize_into(std::string_view raw, std::vector<Token>& out, bool close_last) {
  const std::string lowered = text::to_lower(raw);
  std::vector<char32_t> all;
  for (text::Utf8Cursor cur(lowered); !cur.done();) all.push_back(cur.next());

  std::vector<char32_t> chunk;
  const auto end_chunk = [&](bool followed_by_space) {
    if (chunk.empty()) return;
    split_chunk(chunk, out);
    if (followed_by_space && is_sentence_end(chunk.back())) out.emplace_back(kEos);
    chunk.clear();
  };
  for (char32_t c : all) {
    if (text::is_space(c)) {
      end_chunk(true);
    } else {
      chunk.push_back(c);
    }
  }
  end_chunk(close_last);
  if (close_last && (out.empty() || out.back() != kEos)) out.emplace_back(kEos);
}

}  // namespace

std::vector<Token> tokenize(std::string_view raw_text) {
  std::vector<Token> out;
  out.emplace_back(kBor);
  tokenize_into(raw_text, out, true);
  if (out.size() == 1) out.emplace_back(kEos);
  return out;
}

std::vector<Token> tokenize_fragment(std::string_view raw_text) {
  std::vector<Token> out;
  tokenize_into(raw_text, out, false);
  return out;
}

std::vector<Document> documents_from_lines(std::span<const std::string> lines) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    char id[32];
    std::snprintf(id, sizeof id, "doc-%06zu", i + 1);
    docs.push_back({id, tokenize(line)});
  }
  return docs;
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<std::string> lines;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!text::is_valid_utf8(line)) throw ParseError("corpus line is not valid UTF-8", n);
    lines.push_back(std::move(line));
  }
  return documents_from_lines(lines);
}

CorpusSplit split_corpus(std::span<const Document> docs, double holdout_fraction,
                         std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw InvalidArgument("holdout fraction must lie in (0, 1)");
  if (docs.size() < 3) throw InvalidArgument("corpus needs at least 3 documents to split");

  const std::size_t n = docs.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

  const auto holdout = static_cast<std::size_t>(std::lround(holdout_fraction * double(n)));
  if (holdout >= n) throw InvalidArgument("holdout fraction leaves no training documents");
  const std::size_t first_half = (holdout + 1) / 2;

  std::vector<std::size_t> train(perm.begin() + holdout, perm.end());
  std::vector<std::size_t> ht(perm.begin(), perm.begin() + first_half);
  std::vector<std::size_t> he(perm.begin() + first_half, perm.begin() + holdout);
  CorpusSplit split;
  const auto collect = [&](std::vector<std::size_t>& idx, std::vector<Document>& into) {
    std::sort(idx.begin(), idx.end());
    into.reserve(idx.size());
    for (auto i : idx) into.push_back(docs[i]);
  };
  collect(train, split.train);
  collect(ht, split.heldout_train);
  collect(he, split.heldout_test);
  return split;
}

void save_split_ids(const CorpusSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::vector<Document>& docs, const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    for (const auto& d : docs) out << d.id << '\n';
  };
  write(split.train, "train.ids");
  write(split.heldout_train, "heldout_train.ids");
  write(split.heldout_test, "heldout_test.ids");
}

std::vector<std::string> load_ids(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ids.push_back(line);
  return ids;
}

std::vector<SuggestionLocation> sample_locations(std::span<const Document> docs, std::size_t n,
                                                 std::size_t min_context, std::uint64_t seed,
                                                 std::size_t suggestion_length) {
  if (n == 0) throw InvalidArgument("sample_locations needs n >= 1");
  const std::size_t lo = std::max<std::size_t>(1, min_context);
  std::vector<std::uint64_t> cumulative;
  cumulative.reserve(docs.size());
  std::uint64_t total = 0;
  for (const auto& d : docs) {
    const std::size_t len = d.tokens.size();
    if (len >= suggestion_length + lo) total += len - suggestion_length - lo + 1;
    cumulative.push_back(total);
  }
  if (total == 0) throw InvalidArgument("no eligible suggestion locations");

  Rng rng(seed);
  std::vector<SuggestionLocation> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t r = rng.below(total);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    const auto doc = static_cast<std::size_t>(it - cumulative.begin());
    const std::uint64_t before = doc == 0 ? 0 : cumulative[doc - 1];
    const auto offset = static_cast<std::size_t>(lo + (r - before));
    const auto& toks = docs[doc].tokens;
    SuggestionLocation loc;
    loc.document_id = docs[doc].id;
    loc.offset = offset;
    loc.context.assign(toks.begin(), toks.begin() + static_cast<std::ptrdiff_t>(offset));
    loc.continuation.assign(toks.begin() + static_cast<std::ptrdiff_t>(offset),
                            toks.begin() + static_cast<std::ptrdiff_t>(offset + suggestion_length));
    out.push_back(std::move(loc));
  }
  return out;
}

}  // namespace sugg
