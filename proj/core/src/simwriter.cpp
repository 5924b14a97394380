#include "sugg/simwriter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sugg/error.hpp"

namespace sugg {

double desirability(std::span<const Token> words, const DesirabilityParams& params) {
  std::size_t long_words = 0;
  for (const auto& w : words) long_words += is_long_word(w, params.min_letters) ? 1 : 0;
  return params.scale * double(long_words);
}

double desirability(const Suggestion& suggestion, const DesirabilityParams& params) {
  return desirability(suggestion.words, params);
}

AcceptanceDistribution acceptance_distribution(std::span<const double> p, double p_reject,
                                               std::span<const double> d) {
  if (p.size() != d.size()) throw InvalidArgument("likelihoods and desirabilities differ in count");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && std::isfinite(v))) throw InvalidArgument("likelihoods must be finite and >= 0");
    sum += v;
  }
  for (double v : d)
    if (std::isnan(v)) throw InvalidArgument("desirability is NaN");
  if (sum > 1.0 + 1e-12) throw InvalidArgument("suggestion likelihoods sum to more than 1");
  if (!(p_reject >= 0.0) || std::abs(p_reject - (1.0 - sum)) > 1e-9)
    throw InvalidArgument("reject likelihood must equal 1 - sum of suggestion likelihoods");

  AcceptanceDistribution a;
  a.accept.resize(p.size());
  const double max_d = d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
  if (max_d < 600.0) {
    double z = 1.0;
    for (std::size_t j = 0; j < p.size(); ++j) z -= p[j] * (1.0 - std::exp(d[j]));
    for (std::size_t j = 0; j < p.size(); ++j) a.accept[j] = p[j] * std::exp(d[j]) / z;
    a.reject = p_reject / z;
    return a;
  }
  // exp(D) would overflow: normalize the same weights in log space.
  std::vector<double> logw(p.size() + 1);
  for (std::size_t j = 0; j < p.size(); ++j)
    logw[j] = p[j] > 0.0 ? std::log(p[j]) + d[j] : -INFINITY;
  logw.back() = p_reject > 0.0 ? std::log(p_reject) : -INFINITY;
  const double m = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (double lw : logw) z += std::exp(lw - m);
  for (std::size_t j = 0; j < p.size(); ++j) a.accept[j] = std::exp(logw[j] - m) / z;
  a.reject = std::exp(logw.back() - m) / z;
  return a;
}

PredictiveLikelihoods predictive_likelihoods(const SuggestionSet& set, const NgramModel& lm) {
  PredictiveLikelihoods out;
  const auto base = lm.vocab().encode(set.context);
  double sum = 0.0;
  for (const auto& s : set.suggestions) {
    auto ctx = base;
    double lp = 0.0;
    for (const auto& w : s.words) {
      const WordId id = lm.vocab().id(w);
      lp += lm.log_prob(id, ctx);
      ctx.push_back(id);
    }
    out.p.push_back(std::exp(lp));
    sum += out.p.back();
  }
  if (sum > 1.0 - kLikelihoodSlack) {
    const double scale = (1.0 - kLikelihoodSlack) / sum;
    sum = 0.0;
    for (double& v : out.p) {
      v *= scale;
      sum += v;
    }
  }
  out.reject = 1.0 - sum;
  return out;
}

WriterChoice simulate_choice(const SuggestionSet& set, const WriterModel& writer,
                             const NgramModel& lm, Rng& rng) {
  const std::size_t k = set.suggestions.size();
  PredictiveLikelihoods pl;
  if (writer.predictive == WriterModel::Predictive::base_lm) {
    pl = predictive_likelihoods(set, lm);
  } else {
    pl.p.assign(k, 0.0);
    pl.reject = 1.0;
  }
  std::vector<double> d(k);
  for (std::size_t j = 0; j < k; ++j) d[j] = desirability(set.suggestions[j], writer.desirability);
  const auto a = acceptance_distribution(pl.p, pl.reject, d);

  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    cumulative += a.accept[j];
    if (u < cumulative) {
      const std::size_t len = set.suggestions[j].words.size();
      const std::size_t words =
          writer.prefix_acceptance ? 1 + static_cast<std::size_t>(rng.below(len)) : len;
      return {static_cast<int>(j), words};
    }
  }
  return {};
}

SessionResult simulate_session(std::span<const SuggestionLocation> locations,
                               const LogLinearPolicy& generator, const WriterModel& writer, Rng& rng,
                               const SimulationOptions& options) {
  if (locations.empty()) throw InvalidArgument("simulation needs at least one location");
  SessionResult out;
  out.records.reserve(locations.size() * options.suggestions_per_set);
  const std::string tag = generator.tag();
  double accepted = 0.0;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto& loc = locations[i];
    const auto set = generator.generate_suggestion_set(loc.context, options.suggestions_per_set,
                                                       options.suggestion_length, rng);
    const auto choice = simulate_choice(set, writer, generator.lm(), rng);
    accepted += double(choice.words);
    for (std::size_t j = 0; j < set.suggestions.size(); ++j) {
      const auto& s = set.suggestions[j];
      LogRecord r;
      r.session_id = options.session_id;
      r.event_index = i;
      r.slot = static_cast<std::uint32_t>(j);
      r.document_id = loc.document_id;
      r.context = loc.context;
      r.words = s.words;
      r.per_word_propensities = s.per_word_probs;
      r.propensity = s.propensity;
      r.reward = choice.slot == static_cast<int>(j) ? double(choice.words) : 0.0;
      r.generator = tag;
      r.timestamp_ms = options.timestamp_ms;
      out.records.push_back(std::move(r));
    }
  }
  out.achieved_reward = accepted / double(locations.size());
  return out;
}

RewardEstimate true_reward(const LogLinearPolicy& policy, const WriterModel& writer,
                           std::span<const SuggestionLocation> locations, std::size_t n_rollouts,
                           Rng& rng, const SimulationOptions& options) {
  if (n_rollouts == 0) throw InvalidArgument("true_reward needs n_rollouts >= 1");
  if (locations.empty()) throw InvalidArgument("true_reward needs at least one location");
  // Per-location means are the independent units for the standard error.
  std::vector<double> per_location;
  per_location.reserve(locations.size());
  for (const auto& loc : locations) {
    double words = 0.0;
    for (std::size_t r = 0; r < n_rollouts; ++r) {
      const auto set = policy.generate_suggestion_set(loc.context, options.suggestions_per_set,
                                                      options.suggestion_length, rng);
      words += double(simulate_choice(set, writer, policy.lm(), rng).words);
    }
    per_location.push_back(words / double(n_rollouts));
  }
  const double n = double(per_location.size());
  const double mean = std::accumulate(per_location.begin(), per_location.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : per_location) ss += (v - mean) * (v - mean);
  RewardEstimate est;
  est.mean = mean;
  est.samples = per_location.size() * n_rollouts;
  est.standard_error = per_location.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return est;
}

}  // namespace sugg
