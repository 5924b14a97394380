#include "sugg/features.hpp"

#include <array>
#include <fstream>

#include "sugg/error.hpp"
#include "sugg/text.hpp"

namespace sugg {
namespace {

constexpr std::array<std::string_view, kNumTags> kTagNames = {
    "PUNCT", "ADJ", "ADP", "ADV", "CONJ", "DET", "NOUN", "NUM", "PRON", "PRT", "VERB", "X"};

constexpr std::string_view kLmName = "base_lm";
constexpr std::string_view kLongName = "is_long";

}  // namespace

std::string_view tag_name(PosTag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

std::optional<PosTag> parse_tag(std::string_view name) {
  for (std::size_t i = 0; i < kNumTags; ++i)
    if (kTagNames[i] == name) return static_cast<PosTag>(i);
  return std::nullopt;
}

std::string_view feature_name(std::size_t index) {
  if (index == kLmFeature) return kLmName;
  if (index == kLongWordFeature) return kLongName;
  if (index >= kPosFeatureBase && index < kFeatureDim) return kTagNames[index - kPosFeatureBase];
  throw InvalidArgument("feature index out of range");
}

std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureDim; ++i)
    if (feature_name(i) == name) return i;
  return std::nullopt;
}

PosLexicon::PosLexicon(std::unordered_map<std::string, PosTag> entries)
    : entries_(std::move(entries)) {}

PosLexicon PosLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  std::unordered_map<std::string, PosTag> entries;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("expected word<TAB>TAG", n);
    const auto tag = parse_tag(std::string_view(line).substr(tab + 1));
    if (!tag) throw ParseError("unknown tag '" + line.substr(tab + 1) + "'", n);
    entries[line.substr(0, tab)] = *tag;
  }
  return PosLexicon(std::move(entries));
}

PosTag PosLexicon::lookup(std::string_view word) const {
  const auto it = entries_.find(std::string(word));
  return it == entries_.end() ? PosTag::X : it->second;
}

bool is_long_word(std::string_view word, std::size_t min_letters) {
  return text::letter_count(word) >= min_letters;
}

FeatureVector extract(std::string_view word, std::span<const Token> context, const NgramModel& lm,
                      const PosLexicon& lex) {
  FeatureVector f;
  f.values[kLmFeature] = lm.log_prob(word, context);
  f.values[kLongWordFeature] = is_long_word(word) ? 1.0 : 0.0;
  f.values[kPosFeatureBase + static_cast<std::size_t>(lex.lookup(word))] = 1.0;
  return f;
}

FeatureTable::FeatureTable(const Vocabulary& vocab, const PosLexicon& lex, std::size_t min_letters) {
  long_.reserve(vocab.size());
  tags_.reserve(vocab.size());
  for (const auto& w : vocab.words()) {
    long_.push_back(is_long_word(w, min_letters) ? 1 : 0);
    tags_.push_back(lex.lookup(w));
  }
}

FeatureTable::FeatureTable(std::vector<std::uint8_t> long_word, std::vector<PosTag> tags)
    : long_(std::move(long_word)), tags_(std::move(tags)) {
  if (long_.size() != tags_.size()) throw InvalidArgument("feature table columns differ in length");
}

FeatureVector FeatureTable::vector(WordId w, double lm_log_prob) const {
  FeatureVector f;
  f.values[kLmFeature] = lm_log_prob;
  f.values[kLongWordFeature] = long_[w] ? 1.0 : 0.0;
  f.values[kPosFeatureBase + static_cast<std::size_t>(tags_[w])] = 1.0;
  return f;
}

}  // namespace sugg
