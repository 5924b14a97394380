// sugg: train, simulate, fit, evaluate and serve phrase-suggestion policies.

#include <CLI11.hpp>

#include <csignal>
#include <pthread.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <thread>

#include "run_config.hpp"
#include "sugg/corpus.hpp"
#include "sugg/counterfactual.hpp"
#include "sugg/error.hpp"
#include "sugg/features.hpp"
#include "sugg/logstore.hpp"
#include "sugg/ngram_model.hpp"
#include "sugg/policy.hpp"
#include "sugg/service.hpp"
#include "sugg/simwriter.hpp"
#include "sugg/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sugg;
using sugg::cli::RunConfig;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Paths that are not part of RunConfig; empty means "the default under --out".
struct Paths {
  fs::path lm, logs, heldout_logs;
  std::vector<fs::path> weights;
  fs::path service_config;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string context;
  double lm_weight = 1.0;
  double long_bonus = 0.0;
  bool explicit_weights = false;
};

class Manifest {
 public:
  explicit Manifest(const RunConfig& cfg) : dir_(cfg.out) {
    fs::create_directories(dir_);
    const auto path = dir_ / "manifest.json";
    if (fs::exists(path)) {
      auto j = json::parse(read_file(path), nullptr, false);
      if (j.is_object()) doc_ = std::move(j);
    }
    if (!doc_.contains("files")) doc_["files"] = json::object();
    if (!doc_.contains("commands")) doc_["commands"] = json::array();
    doc_["config"] = json::parse(cfg.to_json());
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void add(const fs::path& file) {
    doc_["files"][fs::relative(file, dir_).generic_string()] = file_hash(file);
  }

  void finish(const std::string& command) {
    doc_["commands"].push_back(command);
    write_file(dir_ / "manifest.json", doc_.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  json doc_;
};

struct Loaded {
  std::vector<Document> docs;
  CorpusSplit split;
};

Loaded load_split(const RunConfig& cfg) {
  Loaded l;
  l.docs = load_documents(cfg.corpus);
  l.split = split_corpus(l.docs, cfg.holdout, cfg.split_seed);
  return l;
}

fs::path or_default(const fs::path& p, const RunConfig& cfg, const char* name) {
  return p.empty() ? cfg.out / name : p;
}

std::shared_ptr<const FeatureTable> feature_table(const NgramModel& lm, const RunConfig& cfg) {
  return std::make_shared<const FeatureTable>(lm.vocab(), PosLexicon::load(cfg.lexicon));
}

std::vector<LoggedInteraction> load_logs(const fs::path& p) {
  auto d = load_dataset(p);
  if (d.interactions.empty()) throw InvalidArgument("no log records in " + p.string());
  return std::move(d.interactions);
}

std::string policy_name(const fs::path& weights) { return weights.stem().string(); }

// ---------------------------------------------------------------- subcommands

void train_lm(const RunConfig& cfg, Manifest& m) {
  const auto t = Clock::now();
  const auto l = load_split(cfg);
  const auto lm = NgramModel::train(l.split.train, cfg.order);
  const auto out = m.path("lm.bin");
  lm.save(out);
  m.add(out);
  save_split_ids(l.split, cfg.out / "split");
  for (const auto* f : {"train.ids", "heldout_train.ids", "heldout_test.ids"}) m.add(cfg.out / "split" / f);
  std::printf("documents %zu (train %zu, heldout_train %zu, heldout_test %zu)\n", l.docs.size(),
              l.split.train.size(), l.split.heldout_train.size(), l.split.heldout_test.size());
  std::printf("order %d\nvocabulary %zu\n", lm.order(), lm.vocab_size());
  const auto& eval = l.split.heldout_test.empty() ? l.split.heldout_train : l.split.heldout_test;
  std::printf("heldout perplexity %.4f\n", lm.perplexity(eval));
  std::printf("wrote %s (%.2fs)\n", out.c_str(), since(t));
}

SessionResult simulate_on(const RunConfig& cfg, const NgramModel& lm, std::shared_ptr<const FeatureTable> ft,
                          std::span<const SuggestionLocation> locs, std::uint64_t seed, const std::string& session) {
  const LogLinearPolicy ref(lm, std::move(ft), PolicyWeights::reference(cfg.tau), "reference");
  Rng rng(seed);
  return simulate_session(locs, ref, cfg.writer(), rng, cfg.simulation(session));
}

void simulate(const RunConfig& cfg, const Paths& p, Manifest& m) {
  const auto t = Clock::now();
  const auto l = load_split(cfg);
  const auto lm = NgramModel::load(or_default(p.lm, cfg, "lm.bin"));
  const auto ft = feature_table(lm, cfg);
  const auto locs = sample_locations(l.split.heldout_train, cfg.train_locations, 1, cfg.stream(1));
  const auto res = simulate_on(cfg, lm, ft, locs, cfg.stream(2), "sim-train");
  const auto out = or_default(p.logs, cfg, "logs.jsonl");
  write_log(out, res.records);
  m.add(out);
  std::size_t accepted = 0;
  for (const auto& r : res.records) accepted += r.reward > 0.0 ? 1 : 0;
  std::printf("locations %zu\nrecords %zu\naccepted %zu\nachieved reward %.6f\n", locs.size(),
              res.records.size(), accepted, res.achieved_reward);
  std::printf("wrote %s (%.2fs)\n", out.c_str(), since(t));
}

struct FitOutputs {
  PolicyWeights fitted, temperature;
};

FitOutputs fit_cmd(const RunConfig& cfg, const Paths& p, Manifest& m) {
  const auto t = Clock::now();
  const auto lm = NgramModel::load(or_default(p.lm, cfg, "lm.bin"));
  const auto ft = feature_table(lm, cfg);
  const auto data = load_logs(or_default(p.logs, cfg, "logs.jsonl"));
  const ClippedObjective obj(data, lm, ft);
  FitOptions opt;
  opt.bfgs.max_iterations = cfg.fit_iterations;
  const auto f = fit(obj, PolicyWeights::reference(cfg.tau), cfg.fit_clip, opt);
  const auto tf = fit_temperature(obj, cfg.fit_clip);
  const auto wpath = m.path("fitted.weights");
  const auto tpath = m.path("temperature.weights");
  f.weights.save(wpath);
  PolicyWeights::reference(tf.tau).save(tpath);
  m.add(wpath);
  m.add(tpath);
  const json summary = {{"records", obj.records()},
                        {"rewarded_records", obj.rewarded_records()},
                        {"max_weight", cfg.fit_clip},
                        {"initial_objective", f.initial_objective},
                        {"objective", f.objective},
                        {"iterations", f.iterations},
                        {"converged", f.converged},
                        {"temperature", {{"tau", tf.tau}, {"objective", tf.objective}, {"flat", tf.flat}}}};
  write_file(m.path("fit.json"), summary.dump(2) + "\n");
  m.add(m.path("fit.json"));
  std::printf("records %zu (rewarded %zu)\n", obj.records(), obj.rewarded_records());
  std::printf("objective %.6f -> %.6f after %zu iterations%s\n", f.initial_objective, f.objective, f.iterations,
              f.converged ? "" : " (not converged)");
  std::printf("temperature tau %.4f objective %.6f%s\n", tf.tau, tf.objective, tf.flat ? " (flat)" : "");
  std::printf("%s", f.weights.to_text().c_str());
  std::printf("wrote %s, %s (%.2fs)\n", wpath.c_str(), tpath.c_str(), since(t));
  return {f.weights, PolicyWeights::reference(tf.tau)};
}

std::vector<std::pair<std::string, PolicyWeights>> policies(const RunConfig& cfg, const Paths& p) {
  std::vector<std::pair<std::string, PolicyWeights>> out{{"reference", PolicyWeights::reference(cfg.tau)}};
  for (const auto& w : p.weights) out.emplace_back(policy_name(w), PolicyWeights::load(w));
  return out;
}

void evaluate(const RunConfig& cfg, const Paths& p, Manifest& m) {
  const auto lm = NgramModel::load(or_default(p.lm, cfg, "lm.bin"));
  const auto ft = feature_table(lm, cfg);
  const auto data = load_logs(or_default(p.logs, cfg, "logs.jsonl"));
  std::string tsv = "policy\tmax_weight\testimate\tn\tclip_fraction\n";
  std::printf("records %zu\nlogged mean reward %.10g\n", data.size(), mean_reward(data));
  for (const auto& [name, w] : policies(cfg, p)) {
    const LogLinearPolicy h(lm, ft, w, name);
    const auto ratios = importance_ratios(data, h);
    for (double mw : cfg.clip_grid) {
      const auto e = clipped_estimate(data, ratios, mw);
      tsv += fmt("%s\t%g\t%.10g\t%zu\t%.6f\n", name.c_str(), mw, e.estimate, e.n, e.clip_fraction);
    }
  }
  std::printf("%s", tsv.c_str());
  write_file(m.path("evaluate.tsv"), tsv);
  m.add(m.path("evaluate.tsv"));
}

void sweep_m(const RunConfig& cfg, const Paths& p, Manifest& m) {
  const auto t = Clock::now();
  const auto lm = NgramModel::load(or_default(p.lm, cfg, "lm.bin"));
  const auto ft = feature_table(lm, cfg);
  const auto data = load_logs(or_default(p.logs, cfg, "logs.jsonl"));
  CrossvalOptions opt;
  opt.folds = cfg.folds;
  opt.fit_clip = cfg.fit_clip;
  opt.clip_grid = cfg.clip_grid;
  opt.reference = PolicyWeights::reference(cfg.tau);
  opt.fit.bfgs.max_iterations = cfg.fit_iterations;
  opt.seed = cfg.stream(6);
  const auto table = crossval_evaluate(data, lm, ft, opt);
  write_file(m.path("crossval_cells.tsv"), table.cells_tsv());
  write_file(m.path("crossval_summary.tsv"), table.summary_tsv());
  m.add(m.path("crossval_cells.tsv"));
  m.add(m.path("crossval_summary.tsv"));
  std::printf("%s", table.summary_tsv().c_str());
  std::printf("wrote crossval_cells.tsv, crossval_summary.tsv (%.2fs)\n", since(t));
}

struct TruthRow {
  std::string name;
  RewardEstimate est;
};

std::vector<TruthRow> true_rewards(const RunConfig& cfg, const NgramModel& lm, std::shared_ptr<const FeatureTable> ft,
                                   const std::vector<std::pair<std::string, PolicyWeights>>& pols,
                                   std::span<const SuggestionLocation> locs) {
  std::vector<TruthRow> rows;
  std::uint64_t k = 0;
  for (const auto& [name, w] : pols) {
    const LogLinearPolicy h(lm, ft, w, name);
    Rng rng(cfg.stream(40 + k++));
    rows.push_back({name, true_reward(h, cfg.writer(), locs, cfg.rollouts, rng, cfg.simulation("truth"))});
  }
  return rows;
}

void true_reward_cmd(const RunConfig& cfg, const Paths& p, Manifest& m) {
  const auto l = load_split(cfg);
  const auto lm = NgramModel::load(or_default(p.lm, cfg, "lm.bin"));
  const auto ft = feature_table(lm, cfg);
  const auto locs = sample_locations(l.split.heldout_test, cfg.eval_locations, 1, cfg.stream(3));
  std::string tsv = "policy\tmean\tstandard_error\tci_low\tci_high\tsamples\n";
  for (const auto& r : true_rewards(cfg, lm, ft, policies(cfg, p), locs))
    tsv += fmt("%s\t%.6f\t%.6f\t%.6f\t%.6f\t%zu\n", r.name.c_str(), r.est.mean, r.est.standard_error,
               r.est.ci_low(), r.est.ci_high(), r.est.samples);
  std::printf("%s", tsv.c_str());
  write_file(m.path("true_reward.tsv"), tsv);
  m.add(m.path("true_reward.tsv"));
}

void generate(const RunConfig& cfg, const Paths& p, Manifest& m) {
  const auto lm = NgramModel::load(or_default(p.lm, cfg, "lm.bin"));
  const auto ft = feature_table(lm, cfg);
  PolicyWeights w;
  std::string name;
  if (!p.weights.empty()) {
    w = PolicyWeights::load(p.weights.front());
    name = policy_name(p.weights.front());
  } else {
    w.theta[kLmFeature] = p.lm_weight;
    w.theta[kLongWordFeature] = p.long_bonus;
    name = fmt("lm%g_long%g", p.lm_weight, p.long_bonus);
  }
  const LogLinearPolicy h(lm, ft, w, name);
  std::vector<Token> ctx{Token(kBor)};
  for (auto& t : tokenize_fragment(p.context)) ctx.push_back(std::move(t));
  Rng rng(cfg.stream(7));
  std::string text;
  double long_words = 0.0;
  for (std::size_t i = 0; i < cfg.generate_samples; ++i) {
    const auto s = h.sample_phrase(ctx, cfg.L, rng);
    for (const auto& t : s.words) long_words += is_long_word(t, cfg.long_word_letters) ? 1.0 : 0.0;
    text += display_text(s.words) + "\n";
  }
  const auto out = m.path("generate_" + name + ".txt");
  write_file(out, text);
  m.add(out);
  std::printf("%s", text.c_str());
  std::printf("mean long words per phrase %.4f over %zu samples\n", long_words / double(cfg.generate_samples),
              cfg.generate_samples);
}

void serve(const RunConfig& cfg, const Paths& p) {
  ServiceConfig sc;
  if (!p.service_config.empty()) {
    sc = ServiceConfig::load(p.service_config);
  } else {
    sc.lm_path = or_default(p.lm, cfg, "lm.bin");
    sc.lexicon_path = cfg.lexicon;
    if (!p.weights.empty()) sc.weights_path = p.weights.front();
    sc.log_path = or_default(p.logs, cfg, "interactions.jsonl");
    sc.tau = cfg.tau;
    sc.suggestions_per_set = cfg.K;
    sc.suggestion_length = cfg.L;
    sc.host = p.host;
    sc.port = p.port;
  }
  // Signals are taken synchronously by one thread so stop() runs outside a handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  if (!sc.log_path.parent_path().empty()) fs::create_directories(sc.log_path.parent_path());
  auto core = std::make_shared<ServiceCore>(sc, std::make_shared<LogStore>(sc.log_path));
  HttpService http(core);
  const int port = http.bind(sc.host, sc.port);
  std::thread loader([&] {
    core->set_model(load_service_model(sc));
    std::fprintf(stderr, "model loaded\n");
  });
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    http.stop();
  });
  std::printf("listening on http://%s:%d (log %s)\n", sc.host.c_str(), port, sc.log_path.c_str());
  std::fflush(stdout);
  http.listen();
  loader.join();
  waiter.join();
}

void pipeline(const RunConfig& cfg, Manifest& m) {
  const auto t = Clock::now();
  Paths p;
  std::printf("== train-lm\n");
  train_lm(cfg, m);
  std::printf("== simulate\n");
  simulate(cfg, p, m);
  std::printf("== fit\n");
  const auto fitted = fit_cmd(cfg, p, m);
  p.weights = {m.path("fitted.weights"), m.path("temperature.weights")};
  std::printf("== evaluate\n");
  evaluate(cfg, p, m);

  std::printf("== held-out estimate vs true reward\n");
  const auto l = load_split(cfg);
  const auto lm = NgramModel::load(m.path("lm.bin"));
  const auto ft = feature_table(lm, cfg);
  const auto locs = sample_locations(l.split.heldout_test, cfg.eval_locations, 1, cfg.stream(3));
  const auto heldout = simulate_on(cfg, lm, ft, locs, cfg.stream(5), "sim-heldout");
  write_log(m.path("heldout_logs.jsonl"), heldout.records);
  m.add(m.path("heldout_logs.jsonl"));
  std::vector<LoggedInteraction> hd;
  for (const auto& r : heldout.records) hd.push_back(to_interaction(r));
  const auto pols = policies(cfg, p);
  const auto truth = true_rewards(cfg, lm, ft, pols, locs);
  std::string tsv = "policy\theldout_estimate\ttrue_reward\tci_low\tci_high\n";
  for (std::size_t i = 0; i < pols.size(); ++i) {
    const LogLinearPolicy h(lm, ft, pols[i].second, pols[i].first);
    const auto e = clipped_estimate(hd, h, cfg.fit_clip);
    tsv += fmt("%s\t%.6f\t%.6f\t%.6f\t%.6f\n", pols[i].first.c_str(), e.estimate, truth[i].est.mean,
               truth[i].est.ci_low(), truth[i].est.ci_high());
  }
  std::printf("%s", tsv.c_str());
  write_file(m.path("estimate_vs_truth.tsv"), tsv);
  m.add(m.path("estimate_vs_truth.tsv"));

  std::printf("== sweep-M\n");
  sweep_m(cfg, Paths{}, m);
  std::printf("== generate\n");
  Paths g;
  g.weights = {m.path("fitted.weights")};
  generate(cfg, g, m);
  (void)fitted;
  std::printf("pipeline finished in %.1fs\n", since(t));
}

// Finds --config before CLI11 parses, so flags can override file values.
RunConfig initial_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return RunConfig::load(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return RunConfig::load(a.substr(9));
  }
  return {};
}

void add_run_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--config", "JSON run config; explicit flags override it");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--corpus", c.corpus, "one review per line")->capture_default_str();
  sub->add_option("--lexicon", c.lexicon, "word<TAB>tag lexicon")->capture_default_str();
  sub->add_option("--order", c.order, "n-gram order")->capture_default_str();
  sub->add_option("--holdout", c.holdout, "fraction of documents held out")->capture_default_str();
  sub->add_option("--split-seed", c.split_seed)->capture_default_str();
  sub->add_option("--tau", c.tau, "reference temperature")->capture_default_str();
  sub->add_option("-K,--suggestions", c.K, "suggestions per set")->capture_default_str();
  sub->add_option("-L,--length", c.L, "words per suggestion")->capture_default_str();
  sub->add_option("--desirability-scale", c.desirability_scale)->capture_default_str();
  sub->add_option("--long-word-letters", c.long_word_letters)->capture_default_str();
  sub->add_option("--predictive-lm", c.predictive_lm, "writer weighs suggestions by LM likelihood")
      ->capture_default_str();
  sub->add_flag("--prefix-acceptance", c.prefix_acceptance, "writer may accept a prefix");
  sub->add_option("--fit-clip", c.fit_clip, "M used for fitting")->capture_default_str();
  sub->add_option("--clip-grid", c.clip_grid, "M values to evaluate")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->capture_default_str();
  sub->add_option("--folds", c.folds)->capture_default_str();
  sub->add_option("--fit-iterations", c.fit_iterations)->capture_default_str();
  sub->add_option("--train-locations", c.train_locations)->capture_default_str();
  sub->add_option("--eval-locations", c.eval_locations)->capture_default_str();
  sub->add_option("--rollouts", c.rollouts)->capture_default_str();
  sub->add_option("-n,--samples", c.generate_samples, "phrases printed by generate")->capture_default_str();
  sub->add_option("--seed", c.seed)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  try {
    cfg = initial_config(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  Paths paths;
  CLI::App app{"Learn phrase-suggestion policies from logged interactions"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* train = app.add_subcommand("train-lm", "train the Kneser-Ney language model");
  auto* sim = app.add_subcommand("simulate", "log reference suggestions shown to the simulated writer");
  auto* fitc = app.add_subcommand("fit", "fit policy weights by clipped IPS");
  auto* eval = app.add_subcommand("evaluate", "clipped estimates of weights on logs");
  auto* sweep = app.add_subcommand("sweep-M", "cross-validated estimates over the clip grid");
  auto* truth = app.add_subcommand("true-reward", "Monte-Carlo reward against the simulated writer");
  auto* gen = app.add_subcommand("generate", "print phrases sampled under given weights");
  auto* srv = app.add_subcommand("serve", "run the suggestion HTTP service");
  auto* pipe = app.add_subcommand("pipeline", "train, simulate, fit, evaluate and sweep in one run");

  for (auto* s : {train, sim, fitc, eval, sweep, truth, gen, srv, pipe}) add_run_options(s, cfg);
  for (auto* s : {sim, fitc, eval, sweep, truth, gen, srv})
    s->add_option("--lm", paths.lm, "language model file (default <out>/lm.bin)");
  for (auto* s : {sim, fitc, eval, sweep, srv}) s->add_option("--logs", paths.logs, "JSONL log file");
  for (auto* s : {eval, truth, gen, srv})
    s->add_option("--weights", paths.weights, "weights file(s); the reference policy is always included")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  gen->add_option("--lm-weight", paths.lm_weight, "LM weight when no --weights is given")->capture_default_str();
  gen->add_option("--long-bonus", paths.long_bonus, "long-word weight when no --weights is given")
      ->capture_default_str();
  gen->add_option("--context", paths.context, "text preceding the phrase");
  srv->add_option("--service-config", paths.service_config, "service JSON config (overrides other flags)");
  srv->add_option("--host", paths.host)->capture_default_str();
  srv->add_option("--port", paths.port)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.validate();
    if (srv->parsed()) {
      serve(cfg, paths);
      return 0;
    }
    Manifest m(cfg);
    std::string name;
    if (train->parsed()) {
      name = "train-lm";
      train_lm(cfg, m);
    } else if (sim->parsed()) {
      name = "simulate";
      simulate(cfg, paths, m);
    } else if (fitc->parsed()) {
      name = "fit";
      fit_cmd(cfg, paths, m);
    } else if (eval->parsed()) {
      name = "evaluate";
      evaluate(cfg, paths, m);
    } else if (sweep->parsed()) {
      name = "sweep-M";
      sweep_m(cfg, paths, m);
    } else if (truth->parsed()) {
      name = "true-reward";
      true_reward_cmd(cfg, paths, m);
    } else if (gen->parsed()) {
      name = "generate";
      generate(cfg, paths, m);
    } else if (pipe->parsed()) {
      name = "pipeline";
      pipeline(cfg, m);
    }
    m.finish(name);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
