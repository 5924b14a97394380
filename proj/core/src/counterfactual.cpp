#include "sugg/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "sugg/error.hpp"
#include "sugg/rng.hpp"

namespace sugg {
namespace {

void require_data(std::span<const LoggedInteraction> data) {
  if (data.empty()) throw InvalidArgument("estimator needs at least one logged interaction");
}

void require_clip(double m) {
  if (!(m >= 1.0)) throw InvalidArgument("clipping constant must be at least 1");
}

std::vector<double> to_vector(const PolicyWeights& w) { return {w.theta.begin(), w.theta.end()}; }

PolicyWeights from_vector(const std::vector<double>& x) {
  PolicyWeights w;
  std::copy(x.begin(), x.end(), w.theta.begin());
  return w;
}

}  // namespace

std::vector<double> importance_ratios(std::span<const LoggedInteraction> data,
                                      const LogLinearPolicy& candidate) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    if (!(d.propensity > 0.0)) throw InvalidArgument("logged propensity must be positive");
    out.push_back(candidate.phrase_probability(d.context, d.action, d.first_word_prefix) /
                  d.propensity);
  }
  return out;
}

double ips_estimate(std::span<const LoggedInteraction> data, const LogLinearPolicy& candidate) {
  require_data(data);
  const auto r = importance_ratios(data, candidate);
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += data[i].reward * r[i];
  return s / double(data.size());
}

EstimateReport clipped_estimate(std::span<const LoggedInteraction> data,
                                const LogLinearPolicy& candidate, double max_weight) {
  require_clip(max_weight);
  require_data(data);
  const auto r = importance_ratios(data, candidate);
  return clipped_estimate(data, r, max_weight);
}

EstimateReport clipped_estimate(std::span<const LoggedInteraction> data,
                                std::span<const double> ratios, double max_weight) {
  require_clip(max_weight);
  require_data(data);
  if (ratios.size() != data.size()) throw InvalidArgument("one ratio per record is required");
  EstimateReport rep;
  rep.n = data.size();
  rep.max_weight = max_weight;
  double s = 0.0;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (ratios[i] >= max_weight) ++clipped;
    s += data[i].reward * std::min(max_weight, ratios[i]);
  }
  rep.estimate = s / double(data.size());
  rep.clip_fraction = double(clipped) / double(data.size());
  return rep;
}

double mean_reward(std::span<const LoggedInteraction> data) {
  require_data(data);
  double s = 0.0;
  for (const auto& d : data) s += d.reward;
  return s / double(data.size());
}

ClippedObjective::ClippedObjective(std::span<const LoggedInteraction> data, const NgramModel& lm,
                                   std::shared_ptr<const FeatureTable> features)
    : n_(data.size()), features_(std::move(features)) {
  require_data(data);
  if (!features_ || features_->size() != lm.vocab_size())
    throw InvalidArgument("feature table does not match the language model vocabulary");
  const auto& vocab = lm.vocab();
  for (const auto& d : data) {
    if (!(d.propensity > 0.0)) throw InvalidArgument("logged propensity must be positive");
    if (!std::isfinite(d.reward) || d.reward < 0.0)
      throw InvalidArgument("reward must be finite and non-negative");
    if (d.reward == 0.0) continue;
    if (d.action.empty()) throw InvalidArgument("logged action has no words");
    Rewarded r{d.reward, d.propensity, {}};
    auto ctx = encode_context(vocab, d.context);
    bool impossible = false;
    for (std::size_t t = 0; t < d.action.size(); ++t) {
      Step s;
      s.target = vocab.id(d.action[t]);
      if (s.target == vocab.bor()) {
        impossible = true;
        break;
      }
      s.lm_log_probs.resize(vocab.size());
      lm.next_log_distribution(ctx, s.lm_log_probs);
      if (t == 0 && !d.first_word_prefix.empty()) {
        s.mask = prefix_mask(vocab, d.first_word_prefix);
        if (std::find(s.mask.begin(), s.mask.end(), 1) == s.mask.end())
          throw InvalidArgument("no vocabulary word matches prefix '" + d.first_word_prefix + "'");
      }
      ctx.push_back(s.target);
      r.steps.push_back(std::move(s));
    }
    // Unreachable actions have h = 0 under every theta.
    if (!impossible) rewarded_.push_back(std::move(r));
  }
}

double ClippedObjective::term(const PolicyWeights& w, const Rewarded& r, double max_weight,
                              std::array<double, kFeatureDim>* grad, bool* clipped) const {
  const std::size_t v = features_->size();
  std::vector<double> dist(v);
  std::array<double, kFeatureDim> score{};
  const auto longs = features_->long_words();
  const auto tags = features_->tags();
  double h = 1.0;
  for (const auto& s : r.steps) {
    log_linear_distribution(s.lm_log_probs, *features_, w, dist, s.mask);
    h *= dist[s.target];
    if (grad) {
      // f(y_t) - E_h[f]
      score[kLmFeature] += s.lm_log_probs[s.target];
      score[kLongWordFeature] += double(longs[s.target]);
      score[kPosFeatureBase + std::size_t(tags[s.target])] += 1.0;
      for (std::size_t i = 0; i < v; ++i) {
        const double p = dist[i];
        if (p == 0.0) continue;
        score[kLmFeature] -= p * s.lm_log_probs[i];
        score[kLongWordFeature] -= p * double(longs[i]);
        score[kPosFeatureBase + std::size_t(tags[i])] -= p;
      }
    }
  }
  const double ratio = h / r.propensity;
  if (ratio >= max_weight) {
    if (clipped) *clipped = true;
    return r.reward * max_weight;
  }
  if (grad)
    for (std::size_t k = 0; k < kFeatureDim; ++k) (*grad)[k] += r.reward * ratio * score[k];
  return r.reward * ratio;
}

ClippedObjective::Result ClippedObjective::evaluate(const PolicyWeights& weights,
                                                    double max_weight) const {
  require_clip(max_weight);
  Result res;
  double s = 0.0;
  for (const auto& r : rewarded_) {
    bool clipped = false;
    s += term(weights, r, max_weight, &res.gradient, &clipped);
    if (clipped) ++res.clipped;
  }
  const double n = double(n_);
  res.value = s / n;
  for (double& g : res.gradient) g /= n;
  return res;
}

double ClippedObjective::value(const PolicyWeights& weights, double max_weight) const {
  require_clip(max_weight);
  double s = 0.0;
  for (const auto& r : rewarded_) s += term(weights, r, max_weight, nullptr, nullptr);
  return s / double(n_);
}

FitResult fit(std::span<const LoggedInteraction> data, const PolicyWeights& theta0,
              double max_weight, const NgramModel& lm,
              std::shared_ptr<const FeatureTable> features, const FitOptions& options) {
  const ClippedObjective obj(data, lm, std::move(features));
  return fit(obj, theta0, max_weight, options);
}

FitResult fit(const ClippedObjective& objective, const PolicyWeights& theta0, double max_weight,
              const FitOptions& options) {
  require_clip(max_weight);
  if (!theta0.all_finite()) throw InvalidArgument("starting weights must be finite");
  const double initial = objective.value(theta0, max_weight);
  if (!std::isfinite(initial)) throw InvalidArgument("objective is not finite at the starting weights");

  const optim::ValueAndGradient f = [&](const std::vector<double>& x, std::vector<double>& g) {
    const auto w = from_vector(x);
    if (!w.all_finite()) return -std::numeric_limits<double>::infinity();
    const auto r = objective.evaluate(w, max_weight);
    std::copy(r.gradient.begin(), r.gradient.end(), g.begin());
    return r.value;
  };

  FitResult best;
  best.weights = theta0;
  best.objective = initial;
  best.initial_objective = initial;
  std::vector<PolicyWeights> starts{theta0};
  starts.insert(starts.end(), options.extra_starts.begin(), options.extra_starts.end());
  bool first = true;
  for (const auto& start : starts) {
    if (!start.all_finite() || !std::isfinite(objective.value(start, max_weight))) continue;
    const auto r = optim::maximize(f, to_vector(start), options.bfgs);
    best.iterations += r.iterations;
    if (first || r.value > best.objective) {
      best.weights = from_vector(r.x);
      best.objective = r.value;
      best.converged = r.converged;
    }
    first = false;
  }
  return best;
}

TemperatureFit fit_temperature(const ClippedObjective& objective, double max_weight, double tol) {
  require_clip(max_weight);
  TemperatureFit out;
  double lo_val = std::numeric_limits<double>::infinity();
  double hi_val = -std::numeric_limits<double>::infinity();
  const auto eval = [&](double tau) {
    const double v = objective.value(PolicyWeights::reference(tau), max_weight);
    ++out.evaluations;
    lo_val = std::min(lo_val, v);
    hi_val = std::max(hi_val, v);
    return v;
  };

  constexpr std::size_t kGrid = 25;
  std::vector<double> grid(kGrid), vals(kGrid);
  const double a = std::log(kMinTemperature), b = std::log(kMaxTemperature);
  std::size_t best = 0;
  for (std::size_t i = 0; i < kGrid; ++i) {
    grid[i] = std::exp(a + (b - a) * double(i) / double(kGrid - 1));
    vals[i] = eval(grid[i]);
    if (vals[i] > vals[best]) best = i;
  }
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[best + 1 == kGrid ? kGrid - 1 : best + 1];
  const auto g = optim::golden_section_maximize(eval, lo, hi, tol);
  if (g.value > vals[best]) {
    out.tau = g.x;
    out.objective = g.value;
  } else {
    out.tau = grid[best];
    out.objective = vals[best];
  }
  out.objective_range = hi_val - lo_val;
  out.flat = out.objective_range <= 1e-9 * std::abs(out.objective);
  if (out.flat) {
    out.tau = kReferenceTemperature;
    out.objective = objective.value(PolicyWeights::reference(out.tau), max_weight);
  }
  return out;
}

TemperatureFit fit_temperature(std::span<const LoggedInteraction> data, double max_weight,
                               const NgramModel& lm, std::shared_ptr<const FeatureTable> features) {
  const ClippedObjective obj(data, lm, std::move(features));
  return fit_temperature(obj, max_weight);
}

double CrossvalTable::cell(std::string_view model, double max_weight, std::size_t fold) const {
  for (const auto& c : cells)
    if (c.model == model && c.max_weight == max_weight && c.fold == fold) return c.estimate;
  throw InvalidArgument("no cross-validation cell for " + std::string(model));
}

const CrossvalSummary& CrossvalTable::summary_for(std::string_view model, double max_weight) const {
  for (const auto& s : summary)
    if (s.model == model && s.max_weight == max_weight) return s;
  throw InvalidArgument("no cross-validation summary for " + std::string(model));
}

std::string CrossvalTable::cells_tsv() const {
  std::string out = "model\tmax_weight\tfold\testimate\n";
  char buf[128];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "\t%g\t%zu\t%.10g\n", c.max_weight, c.fold, c.estimate);
    out += c.model;
    out += buf;
  }
  return out;
}

std::string CrossvalTable::summary_tsv() const {
  std::string out = "model\tmax_weight\tmean\tstddev\n";
  char buf[128];
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf, "\t%g\t%.10g\t%.10g\n", s.max_weight, s.mean, s.stddev);
    out += s.model;
    out += buf;
  }
  return out;
}

CrossvalTable crossval_evaluate(std::span<const LoggedInteraction> data, const NgramModel& lm,
                                std::shared_ptr<const FeatureTable> features,
                                const CrossvalOptions& options) {
  require_data(data);
  require_clip(options.fit_clip);
  for (double m : options.clip_grid) require_clip(m);
  if (options.folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");

  std::set<std::string> unique;
  for (const auto& d : data) unique.insert(d.group);
  std::vector<std::string> groups(unique.begin(), unique.end());
  if (groups.size() < options.folds)
    throw InvalidArgument("fewer record groups than cross-validation folds");
  Rng rng(options.seed);
  rng.shuffle(groups.begin(), groups.end());
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < groups.size(); ++i) fold_of[groups[i]] = i % options.folds;

  CrossvalTable table;
  const LogLinearPolicy reference(lm, features, options.reference, "reference");
  for (std::size_t k = 0; k < options.folds; ++k) {
    std::vector<LoggedInteraction> train, test;
    for (const auto& d : data) (fold_of[d.group] == k ? test : train).push_back(d);

    const ClippedObjective obj(train, lm, features);
    const auto fitted = fit(obj, options.reference, options.fit_clip, options.fit);
    const auto temp = fit_temperature(obj, options.fit_clip);
    table.fitted_weights.push_back(fitted.weights);
    table.fitted_tau.push_back(temp.tau);

    const LogLinearPolicy fitted_policy(lm, features, fitted.weights, "fitted");
    const LogLinearPolicy temp_policy(lm, features, PolicyWeights::reference(temp.tau), "temperature");
    const std::pair<const char*, const LogLinearPolicy*> models[] = {
        {"fitted", &fitted_policy}, {"temperature", &temp_policy}, {"reference", &reference}};
    for (const auto& [name, policy] : models) {
      const auto ratios = importance_ratios(test, *policy);
      for (double m : options.clip_grid)
        table.cells.push_back({name, m, k, clipped_estimate(test, ratios, m).estimate});
    }
  }

  for (const char* name : {"fitted", "temperature", "reference"}) {
    for (double m : options.clip_grid) {
      std::vector<double> xs;
      for (const auto& c : table.cells)
        if (c.model == name && c.max_weight == m) xs.push_back(c.estimate);
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= double(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double sd = xs.size() > 1 ? std::sqrt(ss / double(xs.size() - 1)) : 0.0;
      table.summary.push_back({name, m, mean, sd});
    }
  }
  return table;
}

}  // namespace sugg
