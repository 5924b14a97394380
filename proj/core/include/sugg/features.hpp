#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sugg/ngram_model.hpp"

namespace sugg {

// Coarse universal tagset; X is the fallback for unknown words.
enum class PosTag : std::uint8_t { PUNCT, ADJ, ADP, ADV, CONJ, DET, NOUN, NUM, PRON, PRT, VERB, X };

inline constexpr std::size_t kNumTags = 12;
inline constexpr std::size_t kLongWordLetters = 6;

// Layout: [0] base-LM log-probability, [1] long-word indicator, [2..] POS one-hot.
inline constexpr std::size_t kLmFeature = 0;
inline constexpr std::size_t kLongWordFeature = 1;
inline constexpr std::size_t kPosFeatureBase = 2;
inline constexpr std::size_t kFeatureDim = kPosFeatureBase + kNumTags;

std::string_view tag_name(PosTag tag);
std::optional<PosTag> parse_tag(std::string_view name);

/// "base_lm", "is_long", then the tag names.
std::string_view feature_name(std::size_t index);
std::optional<std::size_t> feature_index(std::string_view name);

class PosLexicon {
 public:
  PosLexicon() = default;
  explicit PosLexicon(std::unordered_map<std::string, PosTag> entries);

  /// Tab-separated `word<TAB>TAG` lines; blank lines and `#` comments skipped.
  static PosLexicon load(const std::filesystem::path& path);

  PosTag lookup(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, PosTag> entries_;
};

/// True iff the word has at least `min_letters` alphabetic code points.
bool is_long_word(std::string_view word, std::size_t min_letters = kLongWordLetters);

struct FeatureVector {
  std::array<double, kFeatureDim> values{};

  double lm() const { return values[kLmFeature]; }
  double long_word() const { return values[kLongWordFeature]; }
};

FeatureVector extract(std::string_view word, std::span<const Token> context, const NgramModel& lm,
                      const PosLexicon& lex);

/// Context-independent features of every vocabulary word, precomputed.
class FeatureTable {
 public:
  FeatureTable(const Vocabulary& vocab, const PosLexicon& lex,
               std::size_t min_letters = kLongWordLetters);
  /// Explicit table, mostly for tests; both vectors share one length.
  FeatureTable(std::vector<std::uint8_t> long_word, std::vector<PosTag> tags);

  std::size_t size() const { return tags_.size(); }
  bool long_word(WordId w) const { return long_[w] != 0; }
  PosTag tag(WordId w) const { return tags_[w]; }
  std::span<const std::uint8_t> long_words() const { return long_; }
  std::span<const PosTag> tags() const { return tags_; }

  /// Full vector for a word given its base-LM log-probability.
  FeatureVector vector(WordId w, double lm_log_prob) const;

 private:
  std::vector<std::uint8_t> long_;
  std::vector<PosTag> tags_;
};

}  // namespace sugg
