#include "run_config.hpp"

#include <json.hpp>

#include "sugg/error.hpp"
#include "sugg/util.hpp"

namespace sugg::cli {

using nlohmann::json;

RunConfig RunConfig::from_json(std::string_view text) {
  const auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("run config is not a JSON object", 1);
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "corpus") c.corpus = v.get<std::string>();
      else if (key == "lexicon") c.lexicon = v.get<std::string>();
      else if (key == "order") c.order = v.get<int>();
      else if (key == "holdout") c.holdout = v.get<double>();
      else if (key == "split_seed") c.split_seed = v.get<std::uint64_t>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "K") c.K = v.get<std::size_t>();
      else if (key == "L") c.L = v.get<std::size_t>();
      else if (key == "desirability_scale") c.desirability_scale = v.get<double>();
      else if (key == "long_word_letters") c.long_word_letters = v.get<std::size_t>();
      else if (key == "predictive_lm") c.predictive_lm = v.get<bool>();
      else if (key == "prefix_acceptance") c.prefix_acceptance = v.get<bool>();
      else if (key == "fit_clip") c.fit_clip = v.get<double>();
      else if (key == "clip_grid") c.clip_grid = v.get<std::vector<double>>();
      else if (key == "folds") c.folds = v.get<std::size_t>();
      else if (key == "fit_iterations") c.fit_iterations = v.get<std::size_t>();
      else if (key == "train_locations") c.train_locations = v.get<std::size_t>();
      else if (key == "eval_locations") c.eval_locations = v.get<std::size_t>();
      else if (key == "rollouts") c.rollouts = v.get<std::size_t>();
      else if (key == "generate_samples") c.generate_samples = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "out") c.out = v.get<std::string>();
      else throw InvalidArgument("unknown run config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad run config value: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

std::string RunConfig::to_json() const {
  const json j = {
      {"corpus", corpus.string()},
      {"lexicon", lexicon.string()},
      {"order", order},
      {"holdout", holdout},
      {"split_seed", split_seed},
      {"tau", tau},
      {"K", K},
      {"L", L},
      {"desirability_scale", desirability_scale},
      {"long_word_letters", long_word_letters},
      {"predictive_lm", predictive_lm},
      {"prefix_acceptance", prefix_acceptance},
      {"fit_clip", fit_clip},
      {"clip_grid", clip_grid},
      {"folds", folds},
      {"fit_iterations", fit_iterations},
      {"train_locations", train_locations},
      {"eval_locations", eval_locations},
      {"rollouts", rollouts},
      {"generate_samples", generate_samples},
      {"seed", seed},
      {"out", out.string()},
  };
  return j.dump(2);
}

void RunConfig::validate() const {
  if (order < 1) throw InvalidArgument("order must be at least 1");
  if (!(holdout > 0.0 && holdout < 1.0)) throw InvalidArgument("holdout must be in (0, 1)");
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  if (K < 1 || L < 1) throw InvalidArgument("K and L must be at least 1");
  if (!(fit_clip >= 1.0)) throw InvalidArgument("fit_clip must be at least 1");
  if (clip_grid.empty()) throw InvalidArgument("clip_grid is empty");
  for (double m : clip_grid)
    if (!(m >= 1.0)) throw InvalidArgument("every clip_grid value must be at least 1");
  if (folds < 2) throw InvalidArgument("folds must be at least 2");
  if (rollouts < 1) throw InvalidArgument("rollouts must be at least 1");
  if (long_word_letters < 1) throw InvalidArgument("long_word_letters must be at least 1");
}

WriterModel RunConfig::writer() const {
  WriterModel w;
  w.desirability.scale = desirability_scale;
  w.desirability.min_letters = long_word_letters;
  w.predictive = predictive_lm ? WriterModel::Predictive::base_lm : WriterModel::Predictive::none;
  w.prefix_acceptance = prefix_acceptance;
  return w;
}

SimulationOptions RunConfig::simulation(std::string session_id) const {
  SimulationOptions o;
  o.suggestions_per_set = K;
  o.suggestion_length = L;
  o.session_id = std::move(session_id);
  return o;
}

}  // namespace sugg::cli
