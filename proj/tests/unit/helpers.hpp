#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sugg/corpus.hpp"
#include "sugg/features.hpp"
#include "sugg/ngram_model.hpp"

namespace testing {

inline std::filesystem::path data(const std::string& name) {
  return std::filesystem::path(SUGG_DATA_DIR) / name;
}
inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(SUGG_FIXTURE_DIR) / name;
}

inline std::vector<sugg::Document> docs_from_tokens(const std::vector<std::vector<std::string>>& toks) {
  std::vector<sugg::Document> docs;
  for (std::size_t i = 0; i < toks.size(); ++i) docs.push_back({"d" + std::to_string(i), toks[i]});
  return docs;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Bundled corpus, LM of order 5 and lexicon-based features, built once.
struct Bundled {
  std::vector<sugg::Document> docs;
  sugg::CorpusSplit split;
  sugg::NgramModel lm;
  sugg::PosLexicon lex;
  std::shared_ptr<const sugg::FeatureTable> features;
};

inline const Bundled& bundled() {
  static const Bundled b = [] {
    Bundled x;
    x.docs = sugg::load_documents(data("reviews.txt"));
    x.split = sugg::split_corpus(x.docs, 0.1, 1);
    x.lm = sugg::NgramModel::train(x.split.train);
    x.lex = sugg::PosLexicon::load(data("pos_lexicon.tsv"));
    x.features = std::make_shared<const sugg::FeatureTable>(x.lm.vocab(), x.lex);
    return x;
  }();
  return b;
}

}  // namespace testing
