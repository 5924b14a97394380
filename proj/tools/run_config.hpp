#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sugg/counterfactual.hpp"
#include "sugg/simwriter.hpp"

namespace sugg::cli {

/// Every knob of a run. Defaults are the published experiment constants.
struct RunConfig {
  std::filesystem::path corpus = "data/reviews.txt";
  std::filesystem::path lexicon = "data/pos_lexicon.tsv";
  int order = NgramModel::kDefaultOrder;
  double holdout = 0.10;
  std::uint64_t split_seed = 1;

  double tau = kReferenceTemperature;
  std::size_t K = kSuggestionsPerSet;
  std::size_t L = kSuggestionLength;

  double desirability_scale = kDefaultDesirabilityScale;
  std::size_t long_word_letters = kLongWordLetters;
  bool predictive_lm = true;
  bool prefix_acceptance = false;

  double fit_clip = kDefaultClip;
  std::vector<double> clip_grid = kDefaultClipGrid;
  std::size_t folds = kDefaultFolds;
  std::size_t fit_iterations = 200;

  std::size_t train_locations = 2000;
  std::size_t eval_locations = 500;
  std::size_t rollouts = 4;
  std::size_t generate_samples = 200;

  std::uint64_t seed = 1;
  std::filesystem::path out = "run";

  /// Keys match the field names; unknown keys are errors.
  static RunConfig from_json(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_json() const;

  /// Throws InvalidArgument when a field is outside its module's range.
  void validate() const;

  WriterModel writer() const;
  SimulationOptions simulation(std::string session_id) const;

  // Independent streams derived from `seed`.
  std::uint64_t stream(std::uint64_t k) const { return seed * 1000003ULL + k; }
};

}  // namespace sugg::cli
