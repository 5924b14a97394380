#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sugg/corpus.hpp"
#include "sugg/tokens.hpp"

namespace sugg {

using WordId = std::uint32_t;

/// Predictable words have ids [0, size()); UNK and EOS are among them.
/// BOR has id size(): it conditions predictions but is never predicted.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<Token> words);  // must contain EOS and UNK

  std::size_t size() const { return words_.size(); }
  WordId unk() const { return unk_; }
  WordId eos() const { return eos_; }
  WordId bor() const { return static_cast<WordId>(words_.size()); }

  /// Maps out-of-vocabulary tokens to UNK.
  WordId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const Token& word(WordId id) const;
  const std::vector<Token>& words() const { return words_; }

  std::vector<WordId> encode(std::span<const Token> tokens) const;

 private:
  std::vector<Token> words_;
  std::unordered_map<std::string, WordId> index_;
  WordId unk_ = 0;
  WordId eos_ = 0;
};

/// Interpolated modified Kneser-Ney n-gram model.
///
/// Level k conditions on the last k-1 tokens. The highest level uses raw
/// counts; lower levels use continuation counts, except n-grams that start
/// with BOR, which have no left context and keep raw counts. Level 1
/// interpolates with the uniform distribution over the vocabulary, so every
/// word has positive probability in every context.
class NgramModel {
 public:
  static constexpr int kDefaultOrder = 5;

  struct Discounts {
    std::array<double, 3> d{};  // applied to adjusted counts 1, 2, 3+
  };

  static NgramModel train(std::span<const Document> docs, int order = kDefaultOrder);

  int order() const { return order_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const Discounts& discounts(int level) const { return discounts_.at(level - 1); }

  double prob(WordId word, std::span<const WordId> context) const;
  /// Natural log; uses at most the last order-1 context tokens.
  double log_prob(WordId word, std::span<const WordId> context) const;
  double log_prob(std::string_view word, std::span<const Token> context) const;

  /// Entry i equals prob(i, context) bit-for-bit.
  void next_distribution(std::span<const WordId> context, std::span<double> out) const;
  std::vector<double> next_distribution(std::span<const Token> context) const;
  /// Entry i equals log_prob(i, context) bit-for-bit.
  void next_log_distribution(std::span<const WordId> context, std::span<double> out) const;

  /// Perplexity over every non-BOR token of `docs`.
  double perplexity(std::span<const Document> docs) const;

  void save(const std::filesystem::path& path) const;
  static NgramModel load(const std::filesystem::path& path);

 private:
  struct ContextEntry {
    double gamma = 0.0;               // interpolation weight on level k-1
    std::vector<WordId> words;        // sorted followers
    std::vector<double> discounted;   // (a - D(a)) / total per follower
  };
  using Key = std::u32string;
  using Level = std::unordered_map<Key, ContextEntry>;

  const ContextEntry* find(int level, std::span<const WordId> context) const;
  std::size_t levels_for(std::size_t context_len) const;

  int order_ = kDefaultOrder;
  Vocabulary vocab_;
  std::vector<Discounts> discounts_;
  std::vector<Level> levels_;  // levels_[k-1] is level k
};

}  // namespace sugg
