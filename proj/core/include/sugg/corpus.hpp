#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sugg/tokens.hpp"

namespace sugg {

struct Document {
  std::string id;
  std::vector<Token> tokens;
};

/// Lowercases, splits punctuation into standalone tokens, prepends BOR and
/// closes every sentence with EOS. A sentence ends at [.!?] followed by
/// whitespace or end of input; the final sentence is always closed.
///
/// Apostrophes, hyphens and [.,] survive inside a word when flanked by
/// letters or digits on both sides ("don't", "family-owned", "5.99").
std::vector<Token> tokenize(std::string_view raw_text);

/// tokenize() without the BOR prefix and without closing the last sentence;
/// used for partial text typed so far.
std::vector<Token> tokenize_fragment(std::string_view raw_text);

/// One document per non-empty line; ids are "doc-<line number>".
std::vector<Document> load_documents(const std::filesystem::path& path);
std::vector<Document> documents_from_lines(std::span<const std::string> lines);

struct CorpusSplit {
  std::vector<Document> train;
  std::vector<Document> heldout_train;
  std::vector<Document> heldout_test;
};

/// Shuffles under `seed`, holds out round(fraction * n) documents and halves
/// them; heldout_train receives the extra document when the count is odd.
CorpusSplit split_corpus(std::span<const Document> docs, double holdout_fraction,
                         std::uint64_t seed);

/// Writes train.ids, heldout_train.ids and heldout_test.ids into `dir`.
void save_split_ids(const CorpusSplit& split, const std::filesystem::path& dir);
std::vector<std::string> load_ids(const std::filesystem::path& path);

struct SuggestionLocation {
  std::string document_id;
  std::size_t offset = 0;
  std::vector<Token> context;       // tokens [0, offset)
  std::vector<Token> continuation;  // the next suggestion_length tokens
};

/// Samples `n` locations with replacement, uniformly over every eligible
/// (document, offset): offset >= max(1, min_context) and at least
/// `suggestion_length` tokens remaining.
std::vector<SuggestionLocation> sample_locations(std::span<const Document> docs, std::size_t n,
                                                 std::size_t min_context, std::uint64_t seed,
                                                 std::size_t suggestion_length = 6);

}  // namespace sugg
