#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sugg/corpus.hpp"
#include "sugg/logstore.hpp"
#include "sugg/policy.hpp"

namespace sugg {

inline constexpr double kDefaultDesirabilityScale = 10.0;

struct DesirabilityParams {
  enum class Kind { long_word_count };
  Kind kind = Kind::long_word_count;
  double scale = kDefaultDesirabilityScale;
  std::size_t min_letters = kLongWordLetters;
};

/// scale * number of words with at least min_letters letters.
double desirability(const Suggestion& suggestion, const DesirabilityParams& params);
double desirability(std::span<const Token> words, const DesirabilityParams& params);

struct AcceptanceDistribution {
  std::vector<double> accept;  // one per displayed suggestion
  double reject = 1.0;
};

/// a_j = p_j exp(D_j) / Z, a_reject = p_reject / Z with
/// Z = 1 - sum_j p_j (1 - exp(D_j)).
/// Requires p_j >= 0, sum p_j <= 1 and p_reject = 1 - sum p_j.
AcceptanceDistribution acceptance_distribution(std::span<const double> p, double p_reject,
                                               std::span<const double> desirability);

struct PredictiveLikelihoods {
  std::vector<double> p;
  double reject = 1.0;
};

inline constexpr double kLikelihoodSlack = 1e-9;

/// Phrase likelihoods under the base LM at temperature 1, scaled down if
/// needed so that sum p_j <= 1 - 1e-9.
PredictiveLikelihoods predictive_likelihoods(const SuggestionSet& set, const NgramModel& lm);

struct WriterModel {
  enum class Predictive { base_lm, none };
  DesirabilityParams desirability;
  Predictive predictive = Predictive::base_lm;  // none: every p_j is 0
  /// Accept a random non-empty prefix instead of the whole phrase.
  bool prefix_acceptance = false;
};

struct SimulationOptions {
  std::size_t suggestions_per_set = kSuggestionsPerSet;
  std::size_t suggestion_length = kSuggestionLength;
  std::string session_id = "sim";
  std::int64_t timestamp_ms = 0;
};

/// Outcome of one displayed set: chosen slot (or -1) and words accepted.
struct WriterChoice {
  int slot = -1;
  std::size_t words = 0;
};

WriterChoice simulate_choice(const SuggestionSet& set, const WriterModel& writer,
                             const NgramModel& lm, Rng& rng);

struct SessionResult {
  std::vector<LogRecord> records;  // K per location, location-major
  double achieved_reward = 0.0;    // mean accepted words per location
};

SessionResult simulate_session(std::span<const SuggestionLocation> locations,
                               const LogLinearPolicy& generator, const WriterModel& writer, Rng& rng,
                               const SimulationOptions& options = {});

struct RewardEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
  double ci_low() const { return mean - 1.96 * standard_error; }
  double ci_high() const { return mean + 1.96 * standard_error; }
};

/// Monte-Carlo accepted words per location for `policy` facing `writer`,
/// over n_rollouts displays at every location.
RewardEstimate true_reward(const LogLinearPolicy& policy, const WriterModel& writer,
                           std::span<const SuggestionLocation> locations, std::size_t n_rollouts,
                           Rng& rng, const SimulationOptions& options = {});

}  // namespace sugg
