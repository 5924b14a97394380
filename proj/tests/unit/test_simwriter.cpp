#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures/policy_oracle_values.hpp"
#include "sugg/error.hpp"
#include "sugg/simwriter.hpp"
#include "unit/helpers.hpp"

using namespace sugg;

namespace {

Suggestion phrase(std::vector<Token> words) {
  Suggestion s;
  s.words = std::move(words);
  return s;
}

double total(const AcceptanceDistribution& a) {
  return std::accumulate(a.accept.begin(), a.accept.end(), a.reject);
}

std::vector<SuggestionLocation> locations(std::size_t n, std::uint64_t seed) {
  return sample_locations(testing::bundled().split.heldout_train, n, 1, seed);
}

}  // namespace

TEST_CASE("desirability counts long words") {
  const DesirabilityParams d;
  CHECK(d.scale == 10.0);
  CHECK(d.min_letters == 6);
  CHECK(desirability(phrase({"i", "am", "a", "huge", "sucker", "for"}), d) == 10.0);
  CHECK(desirability(phrase({"really", "enjoyed", "the", "atmosphere", ".", "</s>"}), d) == 30.0);
  CHECK(desirability(phrase({"the", "food", "was", "good", ".", "</s>"}), d) == 0.0);
  CHECK(desirability(phrase({"don't", "!!!!!!", "abc123", "café's", "naïveté", "x"}), d) == 10.0);
  DesirabilityParams half{DesirabilityParams::Kind::long_word_count, 0.5, 4};
  CHECK(desirability(phrase({"good", "food", "is", "fun"}), half) == 1.0);
}

TEST_CASE("acceptance hand case") {
  const std::vector<double> p{0.2, 0.1, 0.05};
  const std::vector<double> d{std::log(2.0), 0.0, 0.0};
  const auto a = acceptance_distribution(p, 0.65, d);
  CHECK(a.accept[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(a.accept[1] == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(a.accept[2] == doctest::Approx(1.0 / 24.0).epsilon(1e-14));
  CHECK(a.reject == doctest::Approx(0.65 / 1.2).epsilon(1e-14));
}

TEST_CASE("zero desirability leaves the predictive likelihoods unchanged") {
  const std::vector<double> p{0.3, 0.2, 0.1};
  const auto a = acceptance_distribution(p, 0.4, std::vector<double>{0, 0, 0});
  for (std::size_t j = 0; j < 3; ++j) CHECK(a.accept[j] == doctest::Approx(p[j]).epsilon(1e-15));
  CHECK(a.reject == doctest::Approx(0.4));
}

TEST_CASE("acceptance distribution sums to one on random inputs") {
  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const std::size_t k = 1 + rng.below(4);
    std::vector<double> p(k), d(k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = rng.uniform() / double(k);
      d[j] = 60.0 * rng.uniform() - 10.0;
      sum += p[j];
    }
    const auto a = acceptance_distribution(p, 1.0 - sum, d);
    worst = std::max(worst, std::abs(total(a) - 1.0));
    for (double v : a.accept) CHECK(v >= 0.0);
  }
  CHECK(worst < 1e-12);

  // exp(D) overflows a double here.
  const auto big = acceptance_distribution(std::vector<double>{1e-5, 0.0}, 1.0 - 1e-5,
                                           std::vector<double>{800.0, 900.0});
  CHECK(std::isfinite(big.accept[0]));
  CHECK(big.accept[1] == 0.0);
  CHECK(total(big) == doctest::Approx(1.0));
  CHECK(big.accept[0] > 0.999);
}

TEST_CASE("acceptance is monotone in desirability and likelihood") {
  const std::vector<double> p{0.2, 0.1, 0.05};
  double prev = -1.0, prev_other = 2.0;
  for (double dj = -5.0; dj <= 20.0; dj += 0.5) {
    const auto a = acceptance_distribution(p, 0.65, std::vector<double>{dj, 1.0, 2.0});
    CHECK(a.accept[0] > prev);
    CHECK(a.accept[1] < prev_other);
    prev = a.accept[0];
    prev_other = a.accept[1];
  }
  prev = -1.0;
  for (double pj = 0.01; pj < 0.6; pj += 0.01) {
    const auto a = acceptance_distribution(std::vector<double>{pj, 0.1, 0.05}, 1.0 - pj - 0.15,
                                           std::vector<double>{1.0, 1.0, 1.0});
    CHECK(a.accept[0] > prev);
    prev = a.accept[0];
  }
}

TEST_CASE("acceptance distribution rejects inconsistent inputs") {
  CHECK_THROWS_AS(acceptance_distribution(std::vector<double>{0.5}, 0.5, std::vector<double>{0, 0}),
                  InvalidArgument);
  CHECK_THROWS_AS(acceptance_distribution(std::vector<double>{0.7, 0.6}, 0.0, std::vector<double>{0, 0}),
                  InvalidArgument);
  CHECK_THROWS_AS(acceptance_distribution(std::vector<double>{-0.1}, 1.1, std::vector<double>{0}),
                  InvalidArgument);
  CHECK_THROWS_AS(acceptance_distribution(std::vector<double>{0.5}, 0.3, std::vector<double>{0}),
                  InvalidArgument);
  CHECK_THROWS_AS(acceptance_distribution(std::vector<double>{0.5}, 0.5, std::vector<double>{std::nan("")}),
                  InvalidArgument);
}

TEST_CASE("predictive likelihoods are base LM phrase probabilities") {
  const auto& b = testing::bundled();
  const LogLinearPolicy ref(b.lm, b.features, PolicyWeights::reference());
  const LogLinearPolicy base(b.lm, b.features, PolicyWeights::reference(1.0));
  Rng rng(3);
  for (const auto& loc : locations(50, 3)) {
    const auto set = ref.generate_suggestion_set(loc.context, 3, 6, rng);
    const auto pl = predictive_likelihoods(set, b.lm);
    REQUIRE(pl.p.size() == 3);
    double sum = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(pl.p[j] == doctest::Approx(base.phrase_probability(loc.context, set.suggestions[j].words)).epsilon(1e-9));
      sum += pl.p[j];
    }
    CHECK(pl.reject == doctest::Approx(1.0 - sum).epsilon(1e-15));
  }
}

TEST_CASE("predictive likelihoods are rescaled when they exhaust the mass") {
  const auto lm = NgramModel::train(testing::docs_from_tokens(policy_oracle::toy_docs), 2);
  SuggestionSet set;
  set.context = {"<r>"};
  for (const auto* w : {"</s>", "<unk>", "sucker"}) set.suggestions.push_back(phrase({w}));
  const auto pl = predictive_likelihoods(set, lm);
  const double sum = std::accumulate(pl.p.begin(), pl.p.end(), 0.0);
  CHECK(sum <= 1.0 - kLikelihoodSlack + 1e-15);
  CHECK(pl.reject >= kLikelihoodSlack - 1e-15);
  const double scale = pl.p[0] / lm.prob(lm.vocab().eos(), std::vector<WordId>{lm.vocab().bor()});
  CHECK(scale < 1.0);
  CHECK(pl.p[2] / lm.prob(lm.vocab().id("sucker"), std::vector<WordId>{lm.vocab().bor()}) == doctest::Approx(scale));
  const auto a = acceptance_distribution(pl.p, pl.reject, std::vector<double>{0, 0, 10});
  CHECK(total(a) == doctest::Approx(1.0));
}

TEST_CASE("simulate_choice follows the acceptance distribution") {
  const auto lm = NgramModel::train(testing::docs_from_tokens(policy_oracle::toy_docs), 2);
  SuggestionSet set;
  set.context = {"<r>"};
  set.suggestions = {phrase({"sucker", "sucker"}), phrase({"sucker", "</s>"}), phrase({"</s>", "</s>"})};
  WriterModel writer;
  writer.desirability.scale = 0.5;
  const auto pl = predictive_likelihoods(set, lm);
  std::vector<double> d;
  for (const auto& s : set.suggestions) d.push_back(desirability(s, writer.desirability));
  const auto a = acceptance_distribution(pl.p, pl.reject, d);

  Rng rng(5);
  const std::size_t n = 200000;
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = simulate_choice(set, writer, lm, rng);
    if (c.slot < 0) {
      ++counts[3];
      CHECK(c.words == 0);
    } else {
      ++counts[std::size_t(c.slot)];
      CHECK(c.words == 2);
    }
  }
  for (std::size_t j = 0; j < 4; ++j) {
    const double q = j < 3 ? a.accept[j] : a.reject;
    const double sigma = std::sqrt(double(n) * q * (1.0 - q));
    CHECK(std::abs(double(counts[j]) - double(n) * q) < 4.0 * sigma + 1.0);
  }
}

TEST_CASE("writer without predictive model never accepts") {
  const auto& b = testing::bundled();
  const LogLinearPolicy ref(b.lm, b.features, PolicyWeights::reference());
  WriterModel writer;
  writer.predictive = WriterModel::Predictive::none;
  Rng rng(7);
  const auto locs = locations(100, 7);
  CHECK(true_reward(ref, writer, locs, 2, rng).mean == 0.0);
}

TEST_CASE("prefix acceptance takes a non-empty prefix") {
  const auto& b = testing::bundled();
  const LogLinearPolicy ref(b.lm, b.features, PolicyWeights::reference());
  WriterModel writer;
  writer.prefix_acceptance = true;
  Rng rng(9);
  std::size_t accepted = 0, partial = 0;
  for (const auto& loc : locations(2000, 9)) {
    const auto set = ref.generate_suggestion_set(loc.context, 3, 6, rng);
    const auto c = simulate_choice(set, writer, b.lm, rng);
    if (c.slot < 0) continue;
    ++accepted;
    CHECK(c.words >= 1);
    CHECK(c.words <= 6);
    if (c.words < 6) ++partial;
  }
  CHECK(accepted > 100);
  CHECK(partial > 0);
}

TEST_CASE("simulate_session record layout and rewards") {
  const auto& b = testing::bundled();
  const LogLinearPolicy ref(b.lm, b.features, PolicyWeights::reference(), "reference");
  const WriterModel writer;
  const auto locs = locations(300, 11);
  Rng rng(11);
  SimulationOptions opt;
  opt.session_id = "s1";
  opt.timestamp_ms = 1234;
  const auto res = simulate_session(locs, ref, writer, rng, opt);
  REQUIRE(res.records.size() == 900);
  double total_reward = 0.0;
  for (std::size_t i = 0; i < locs.size(); ++i) {
    std::size_t rewarded = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& r = res.records[3 * i + j];
      CHECK(r.event_index == i);
      CHECK(r.slot == j);
      CHECK(r.session_id == "s1");
      CHECK(r.timestamp_ms == 1234);
      CHECK(r.document_id == locs[i].document_id);
      CHECK(r.context == locs[i].context);
      CHECK(r.generator == ref.tag());
      CHECK(r.words.size() == 6);
      CHECK(r.propensity == ref.phrase_probability(r.context, r.words));
      CHECK_FALSE(validate(r).has_value());
      if (r.reward != 0.0) {
        ++rewarded;
        CHECK(r.reward == 6.0);
      }
      total_reward += r.reward;
    }
    CHECK(rewarded <= 1);
  }
  CHECK(res.achieved_reward == doctest::Approx(total_reward / 300.0));
  CHECK(res.achieved_reward > 0.0);
}

TEST_CASE("simulation is deterministic under a seed") {
  const auto& b = testing::bundled();
  const LogLinearPolicy ref(b.lm, b.features, PolicyWeights::reference());
  const auto locs = locations(50, 13);
  Rng r1(42), r2(42), r3(43);
  const auto a = simulate_session(locs, ref, WriterModel{}, r1);
  const auto c = simulate_session(locs, ref, WriterModel{}, r2);
  const auto d = simulate_session(locs, ref, WriterModel{}, r3);
  CHECK(a.records == c.records);
  CHECK(a.records != d.records);
  CHECK_THROWS_AS(simulate_session({}, ref, WriterModel{}, r1), InvalidArgument);
}

TEST_CASE("true reward estimate") {
  const auto& b = testing::bundled();
  const LogLinearPolicy ref(b.lm, b.features, PolicyWeights::reference());
  const auto locs = locations(200, 15);
  Rng r1(1), r2(1);
  const auto e = true_reward(ref, WriterModel{}, locs, 3, r1);
  CHECK(e.samples == 600);
  CHECK(e.mean > 0.0);
  CHECK(e.standard_error > 0.0);
  CHECK(e.ci_low() < e.mean);
  CHECK(e.ci_high() > e.mean);
  CHECK(true_reward(ref, WriterModel{}, locs, 3, r2).mean == e.mean);
  CHECK_THROWS_AS(true_reward(ref, WriterModel{}, locs, 0, r1), InvalidArgument);

  // Long words are what the writer wants, so rewarding them cannot hurt much.
  PolicyWeights w = PolicyWeights::reference();
  w.theta[kLongWordFeature] = 2.0;
  const LogLinearPolicy longer(b.lm, b.features, w);
  Rng r3(1);
  const auto el = true_reward(longer, WriterModel{}, locs, 3, r3);
  CHECK(el.mean > e.mean);
}
