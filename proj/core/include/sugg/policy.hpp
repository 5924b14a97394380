#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sugg/features.hpp"
#include "sugg/ngram_model.hpp"
#include "sugg/rng.hpp"

namespace sugg {

inline constexpr double kReferenceTemperature = 0.5;
inline constexpr std::size_t kSuggestionLength = 6;
inline constexpr std::size_t kSuggestionsPerSet = 3;

struct PolicyWeights {
  std::array<double, kFeatureDim> theta{};

  /// Temperature sampling from the base LM: weight 1/tau on the LM feature.
  static PolicyWeights reference(double tau = kReferenceTemperature);

  bool all_finite() const;
  /// 16 hex digits over the exact bit patterns of theta.
  std::string hash() const;

  /// `feature_name value` per line in feature order, values round-trip exact.
  void save(const std::filesystem::path& path) const;
  static PolicyWeights load(const std::filesystem::path& path);
  std::string to_text() const;
  static PolicyWeights from_text(std::string_view text);

  friend bool operator==(const PolicyWeights&, const PolicyWeights&) = default;
};

/// Softmax of theta . f(w) over the vocabulary with max subtraction.
/// `lm_log_probs` holds the base-LM log-probability of every word. When
/// `mask` is non-empty only words with a non-zero mask entry get mass.
void log_linear_distribution(std::span<const double> lm_log_probs, const FeatureTable& features,
                             const PolicyWeights& weights, std::span<double> out,
                             std::span<const std::uint8_t> mask = {});

/// p0(w|c)^(1/tau) renormalized, computed directly from the base LM.
std::vector<double> reference_distribution(const NgramModel& lm, double tau,
                                           std::span<const Token> context);

struct Suggestion {
  std::vector<Token> words;
  std::vector<WordId> ids;
  std::vector<double> per_word_probs;
  double propensity = 1.0;  // product of per_word_probs, in order
};

struct SuggestionSet {
  std::vector<Token> context;
  std::string first_word_prefix;  // empty unless generated mid-word
  std::vector<Suggestion> suggestions;
};

/// Vocabulary words (markers excluded) starting with `prefix`.
std::vector<std::uint8_t> prefix_mask(const Vocabulary& vocab, std::string_view prefix);

struct PolicyOptions {
  /// Keep only the k best-scoring words per step; 0 keeps the full vocabulary.
  std::size_t top_k = 0;
};

/// Locally-normalized log-linear phrase policy over a base n-gram model.
/// Immutable; the model and feature table must outlive the policy.
class LogLinearPolicy {
 public:
  LogLinearPolicy(const NgramModel& lm, std::shared_ptr<const FeatureTable> features,
                  PolicyWeights weights, std::string name = "loglinear",
                  PolicyOptions options = {});

  const NgramModel& lm() const { return *lm_; }
  const FeatureTable& features() const { return *features_; }
  std::shared_ptr<const FeatureTable> feature_table() const { return features_; }
  const PolicyWeights& weights() const { return weights_; }
  const std::string& name() const { return name_; }
  /// "<name>:<weights hash>"; identifies the generator in logs.
  std::string tag() const;

  void word_distribution(std::span<const WordId> context, std::span<double> out,
                         std::span<const std::uint8_t> mask = {}) const;
  std::vector<double> word_distribution(std::span<const Token> context) const;

  /// Samples `length` words one at a time. A non-empty `first_word_prefix`
  /// restricts the first word to vocabulary words with that prefix.
  Suggestion sample_phrase(std::span<const Token> context, std::size_t length, Rng& rng,
                           std::string_view first_word_prefix = {}) const;

  /// h(words | context) as the ordered product of per-word probabilities;
  /// bit-identical to the propensity recorded by sample_phrase.
  double phrase_probability(std::span<const Token> context, std::span<const Token> words,
                            std::string_view first_word_prefix = {}) const;
  double phrase_log_probability(std::span<const Token> context, std::span<const Token> words,
                                std::string_view first_word_prefix = {}) const;

  /// K phrases with pairwise-distinct first words. Collisions resample the
  /// first word; propensities stay those of unconstrained sampling.
  SuggestionSet generate_suggestion_set(std::span<const Token> context, std::size_t k,
                                        std::size_t length, Rng& rng,
                                        std::string_view first_word_prefix = {}) const;

 private:
  WordId sample_word(std::span<const double> dist, Rng& rng) const;

  const NgramModel* lm_;
  std::shared_ptr<const FeatureTable> features_;
  PolicyWeights weights_;
  std::string name_;
  PolicyOptions options_;
};

std::vector<WordId> encode_context(const Vocabulary& vocab, std::span<const Token> context);

}  // namespace sugg
