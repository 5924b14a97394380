#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sugg/bfgs.hpp"
#include "sugg/interaction.hpp"
#include "sugg/policy.hpp"

namespace sugg {

inline constexpr double kDefaultClip = 10.0;
inline constexpr std::size_t kDefaultFolds = 5;
inline const std::vector<double> kDefaultClipGrid = {1, 2, 5, 10, 20, 50};

struct EstimateReport {
  double estimate = 0.0;
  std::size_t n = 0;
  double clip_fraction = 0.0;  // records with ratio >= M
  double max_weight = kDefaultClip;
};

/// h(y_i|x_i) / p_i for every record, in order.
std::vector<double> importance_ratios(std::span<const LoggedInteraction> data,
                                      const LogLinearPolicy& candidate);

/// (1/n) sum delta_i h(y_i|x_i) / p_i. Throws on empty data.
double ips_estimate(std::span<const LoggedInteraction> data, const LogLinearPolicy& candidate);

/// (1/n) sum delta_i min(M, h(y_i|x_i) / p_i). Throws if M < 1 or data is empty.
EstimateReport clipped_estimate(std::span<const LoggedInteraction> data,
                                const LogLinearPolicy& candidate, double max_weight = kDefaultClip);
EstimateReport clipped_estimate(std::span<const LoggedInteraction> data,
                                std::span<const double> ratios, double max_weight);

/// mean(delta); what any estimator returns for the logging policy itself.
double mean_reward(std::span<const LoggedInteraction> data);

/// The clipped objective over theta with gradients.
///
/// Records with zero reward contribute nothing to the value or gradient, so
/// only rewarded records are kept; their per-step base-LM log-probabilities
/// are computed once at construction.
class ClippedObjective {
 public:
  ClippedObjective(std::span<const LoggedInteraction> data, const NgramModel& lm,
                   std::shared_ptr<const FeatureTable> features);

  struct Result {
    double value = 0.0;
    std::array<double, kFeatureDim> gradient{};
    std::size_t clipped = 0;  // rewarded records with ratio >= M
  };

  /// Value and gradient. Clipped terms get zero gradient.
  Result evaluate(const PolicyWeights& weights, double max_weight) const;
  double value(const PolicyWeights& weights, double max_weight) const;

  std::size_t records() const { return n_; }
  std::size_t rewarded_records() const { return rewarded_.size(); }

 private:
  struct Step {
    WordId target;
    std::vector<double> lm_log_probs;
    std::vector<std::uint8_t> mask;  // empty unless restricted by a prefix
  };
  struct Rewarded {
    double reward;
    double propensity;
    std::vector<Step> steps;
  };

  double term(const PolicyWeights& w, const Rewarded& r, double max_weight,
              std::array<double, kFeatureDim>* grad, bool* clipped) const;

  std::size_t n_;
  std::shared_ptr<const FeatureTable> features_;
  std::vector<Rewarded> rewarded_;
};

struct FitOptions {
  optim::BfgsOptions bfgs{};
  /// Starting points tried in addition to theta0; the best fit wins.
  std::vector<PolicyWeights> extra_starts;
};

struct FitResult {
  PolicyWeights weights;
  double objective = 0.0;  // clipped estimate at the returned weights
  double initial_objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Local maximization of the clipped estimate from theta0 (plus extra starts).
FitResult fit(std::span<const LoggedInteraction> data, const PolicyWeights& theta0,
              double max_weight, const NgramModel& lm,
              std::shared_ptr<const FeatureTable> features, const FitOptions& options = {});
FitResult fit(const ClippedObjective& objective, const PolicyWeights& theta0, double max_weight,
              const FitOptions& options = {});

struct TemperatureFit {
  double tau = 1.0;
  double objective = 0.0;
  double objective_range = 0.0;  // max - min over every evaluated tau
  bool flat = false;             // range within 1e-9 relative of the objective
  std::size_t evaluations = 0;
};

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 5.0;

/// Maximizes the clipped estimate over theta = (1/tau, 0, ...), tau in
/// [0.05, 5]: a log-spaced grid brackets the best tau, then golden-section
/// search refines it to 1e-4.
TemperatureFit fit_temperature(const ClippedObjective& objective, double max_weight,
                               double tol = 1e-4);
TemperatureFit fit_temperature(std::span<const LoggedInteraction> data, double max_weight,
                               const NgramModel& lm, std::shared_ptr<const FeatureTable> features);

struct CrossvalOptions {
  std::size_t folds = kDefaultFolds;
  double fit_clip = kDefaultClip;
  std::vector<double> clip_grid = kDefaultClipGrid;
  PolicyWeights reference = PolicyWeights::reference();  // the logging policy
  FitOptions fit{};
  std::uint64_t seed = 1;
};

struct CrossvalCell {
  std::string model;  // "fitted", "temperature", "reference"
  double max_weight = 0.0;
  std::size_t fold = 0;
  double estimate = 0.0;
};

struct CrossvalSummary {
  std::string model;
  double max_weight = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct CrossvalTable {
  std::vector<CrossvalCell> cells;
  std::vector<CrossvalSummary> summary;
  std::vector<PolicyWeights> fitted_weights;  // one per fold
  std::vector<double> fitted_tau;             // one per fold

  double cell(std::string_view model, double max_weight, std::size_t fold) const;
  const CrossvalSummary& summary_for(std::string_view model, double max_weight) const;
  std::string cells_tsv() const;
  std::string summary_tsv() const;
};

/// Folds group records by LoggedInteraction::group. For every fold the full
/// model and the temperature-only model are fit on the other folds at
/// fit_clip, then all three models are estimated on the held-out fold at
/// every M in clip_grid.
CrossvalTable crossval_evaluate(std::span<const LoggedInteraction> data, const NgramModel& lm,
                                std::shared_ptr<const FeatureTable> features,
                                const CrossvalOptions& options = {});

}  // namespace sugg
