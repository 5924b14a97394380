#include <benchmark/benchmark.h>

#include <filesystem>
#include <memory>

#include "sugg/corpus.hpp"
#include "sugg/counterfactual.hpp"
#include "sugg/features.hpp"
#include "sugg/logstore.hpp"
#include "sugg/ngram_model.hpp"
#include "sugg/policy.hpp"
#include "sugg/simwriter.hpp"

using namespace sugg;

namespace {

struct World {
  CorpusSplit split;
  NgramModel lm;
  std::shared_ptr<const FeatureTable> features;
  std::vector<LogRecord> records;
  std::vector<LoggedInteraction> data;

  World()
      : split(split_corpus(load_documents(SUGG_DATA_DIR "/reviews.txt"), 0.10, 1)),
        lm(NgramModel::train(split.train, NgramModel::kDefaultOrder)),
        features(std::make_shared<const FeatureTable>(lm.vocab(),
                                                      PosLexicon::load(SUGG_DATA_DIR "/pos_lexicon.tsv"))) {
    const LogLinearPolicy ref(lm, features, PolicyWeights::reference(kReferenceTemperature), "reference");
    const auto locs = sample_locations(split.heldout_train, 1000, 1, 11);
    Rng rng(12);
    SimulationOptions opt;
    opt.session_id = "bench";
    records = simulate_session(locs, ref, WriterModel{}, rng, opt).records;
    for (const auto& r : records) data.push_back(to_interaction(r));
  }
};

const World& world() {
  static const World w;
  return w;
}

std::vector<Token> context() { return {Token(kBor), "the", "food", "was"}; }

void BM_LmNextDistribution(benchmark::State& state) {
  const auto& w = world();
  const auto ctx = w.lm.vocab().encode(context());
  std::vector<double> out(w.lm.vocab_size());
  for (auto _ : state) {
    w.lm.next_distribution(ctx, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_LmNextDistribution);

void BM_LmTrain(benchmark::State& state) {
  const auto& w = world();
  for (auto _ : state) benchmark::DoNotOptimize(NgramModel::train(w.split.train, NgramModel::kDefaultOrder));
}
BENCHMARK(BM_LmTrain)->Unit(benchmark::kMillisecond);

void BM_PolicySamplePhrase(benchmark::State& state) {
  const auto& w = world();
  const LogLinearPolicy h(w.lm, w.features, PolicyWeights::reference(kReferenceTemperature), "reference");
  const auto ctx = context();
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(h.sample_phrase(ctx, kSuggestionLength, rng));
}
BENCHMARK(BM_PolicySamplePhrase);

void BM_SuggestionSet(benchmark::State& state) {
  const auto& w = world();
  const LogLinearPolicy h(w.lm, w.features, PolicyWeights::reference(kReferenceTemperature), "reference");
  const auto ctx = context();
  Rng rng(2);
  for (auto _ : state)
    benchmark::DoNotOptimize(h.generate_suggestion_set(ctx, kSuggestionsPerSet, kSuggestionLength, rng));
}
BENCHMARK(BM_SuggestionSet);

void BM_ObjectiveEvaluate(benchmark::State& state) {
  const auto& w = world();
  const ClippedObjective obj(w.data, w.lm, w.features);
  auto theta = PolicyWeights::reference(kReferenceTemperature);
  theta.theta[kLongWordFeature] = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(obj.evaluate(theta, kDefaultClip));
  state.counters["rewarded_records"] = double(obj.rewarded_records());
}
BENCHMARK(BM_ObjectiveEvaluate)->Unit(benchmark::kMicrosecond);

void BM_ClippedEstimate(benchmark::State& state) {
  const auto& w = world();
  auto theta = PolicyWeights::reference(kReferenceTemperature);
  theta.theta[kLongWordFeature] = 0.5;
  const LogLinearPolicy h(w.lm, w.features, theta, "bench");
  for (auto _ : state) benchmark::DoNotOptimize(clipped_estimate(w.data, h, kDefaultClip));
  state.counters["records"] = double(w.data.size());
}
BENCHMARK(BM_ClippedEstimate)->Unit(benchmark::kMillisecond);

void BM_AcceptanceDistribution(benchmark::State& state) {
  const std::vector<double> p{0.02, 0.01, 0.005};
  const std::vector<double> d{1.2, 0.0, 3.4};
  const double reject = 1.0 - 0.035;
  for (auto _ : state) benchmark::DoNotOptimize(acceptance_distribution(p, reject, d));
}
BENCHMARK(BM_AcceptanceDistribution);

void BM_LogAppend(benchmark::State& state) {
  const auto& w = world();
  const auto path = std::filesystem::temp_directory_path() / "sugg_bench_log.jsonl";
  std::filesystem::remove(path);
  {
    LogStore store(path);
    std::size_t i = 0;
    auto rec = w.records.front();
    for (auto _ : state) {
      const auto n = w.records.size();
      const auto& src = w.records[i % n];
      rec.session_id = "bench-" + std::to_string(i / n);
      rec.event_index = src.event_index;
      rec.words = src.words;
      rec.per_word_propensities = src.per_word_propensities;
      rec.propensity = src.propensity;
      rec.reward = src.reward;
      store.append(rec);
      ++i;
    }
  }
  state.SetItemsProcessed(state.iterations());
  std::filesystem::remove(path);
}
BENCHMARK(BM_LogAppend);

void BM_LogSerialize(benchmark::State& state) {
  const auto& w = world();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(to_json_line(w.records[i++ % w.records.size()]));
}
BENCHMARK(BM_LogSerialize);

}  // namespace

BENCHMARK_MAIN();
