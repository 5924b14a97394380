#include "sugg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

#include "sugg/error.hpp"
#include "sugg/util.hpp"

namespace sugg {

PolicyWeights PolicyWeights::reference(double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("temperature must be positive");
  PolicyWeights w;
  w.theta[kLmFeature] = 1.0 / tau;
  return w;
}

bool PolicyWeights::all_finite() const {
  return std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); });
}

std::string PolicyWeights::hash() const {
  std::string bytes(sizeof theta, '\0');
  std::memcpy(bytes.data(), theta.data(), sizeof theta);
  return hex64(fnv1a64(bytes));
}

std::string PolicyWeights::to_text() const {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", theta[i]);
    out += feature_name(i);
    out += ' ';
    out += buf;
    out += '\n';
  }
  return out;
}

PolicyWeights PolicyWeights::from_text(std::string_view text) {
  PolicyWeights w;
  std::array<bool, kFeatureDim> seen{};
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, value, extra;
    if (!(ls >> name >> value) || (ls >> extra)) throw ParseError("expected 'feature value'", n);
    const auto idx = feature_index(name);
    if (!idx) throw ParseError("unknown feature '" + name + "'", n);
    if (seen[*idx]) throw ParseError("duplicate feature '" + name + "'", n);
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0' || !std::isfinite(v))
      throw ParseError("weight is not a finite number", n);
    w.theta[*idx] = v;
    seen[*idx] = true;
  }
  for (std::size_t i = 0; i < kFeatureDim; ++i)
    if (!seen[i]) throw IoError("weights file is missing feature " + std::string(feature_name(i)));
  return w;
}

void PolicyWeights::save(const std::filesystem::path& path) const { write_file(path, to_text()); }

PolicyWeights PolicyWeights::load(const std::filesystem::path& path) {
  return from_text(read_file(path));
}

void log_linear_distribution(std::span<const double> lm_log_probs, const FeatureTable& features,
                             const PolicyWeights& weights, std::span<double> out,
                             std::span<const std::uint8_t> mask) {
  const std::size_t v = lm_log_probs.size();
  if (out.size() != v || features.size() != v || (!mask.empty() && mask.size() != v))
    throw InvalidArgument("log-linear distribution inputs differ in size");
  const auto& th = weights.theta;
  const double lm_w = th[kLmFeature];
  const double long_w = th[kLongWordFeature];
  const auto longs = features.long_words();
  const auto tags = features.tags();

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v; ++i) {
    if (!mask.empty() && mask[i] == 0) {
      out[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double bias = long_w * double(longs[i]) + th[kPosFeatureBase + std::size_t(tags[i])];
    out[i] = lm_w * lm_log_probs[i] + bias;
    best = std::max(best, out[i]);
  }
  if (!std::isfinite(best)) throw InvalidArgument("log-linear distribution has no support");
  double z = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    out[i] = std::exp(out[i] - best);
    z += out[i];
  }
  for (double& p : out) p = p / z;
}

std::vector<double> reference_distribution(const NgramModel& lm, double tau,
                                           std::span<const Token> context) {
  if (!(tau > 0.0)) throw InvalidArgument("temperature must be positive");
  auto p = lm.next_distribution(context);
  double best = -std::numeric_limits<double>::infinity();
  for (double& v : p) {
    v = std::log(v) / tau;
    best = std::max(best, v);
  }
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - best);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<std::uint8_t> prefix_mask(const Vocabulary& vocab, std::string_view prefix) {
  std::vector<std::uint8_t> mask(vocab.size(), 0);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& w = vocab.words()[i];
    if (!is_marker(w) && w.size() >= prefix.size() && w.compare(0, prefix.size(), prefix) == 0)
      mask[i] = 1;
  }
  return mask;
}

std::vector<WordId> encode_context(const Vocabulary& vocab, std::span<const Token> context) {
  return vocab.encode(context);
}

LogLinearPolicy::LogLinearPolicy(const NgramModel& lm, std::shared_ptr<const FeatureTable> features,
                                 PolicyWeights weights, std::string name, PolicyOptions options)
    : lm_(&lm),
      features_(std::move(features)),
      weights_(weights),
      name_(std::move(name)),
      options_(options) {
  if (!features_ || features_->size() != lm.vocab_size())
    throw InvalidArgument("feature table does not match the language model vocabulary");
  if (!weights_.all_finite()) throw InvalidArgument("policy weights must be finite");
}

std::string LogLinearPolicy::tag() const { return name_ + ":" + weights_.hash(); }

void LogLinearPolicy::word_distribution(std::span<const WordId> context, std::span<double> out,
                                        std::span<const std::uint8_t> mask) const {
  lm_->next_log_distribution(context, out);
  log_linear_distribution(out, *features_, weights_, out, mask);
  const std::size_t k = options_.top_k;
  if (k == 0 || k >= out.size()) return;
  std::vector<double> sorted(out.begin(), out.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   sorted.end(), std::greater<>());
  const double threshold = sorted[k - 1];
  double z = 0.0;
  for (double& p : out) {
    if (p < threshold) p = 0.0;
    z += p;
  }
  for (double& p : out) p /= z;
}

std::vector<double> LogLinearPolicy::word_distribution(std::span<const Token> context) const {
  std::vector<double> out(lm_->vocab_size());
  const auto ctx = encode_context(lm_->vocab(), context);
  word_distribution(ctx, out);
  return out;
}

WordId LogLinearPolicy::sample_word(std::span<const double> dist, Rng& rng) const {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    cumulative += dist[i];
    last_positive = i;
    if (u < cumulative) return static_cast<WordId>(i);
  }
  return static_cast<WordId>(last_positive);
}

namespace {

std::vector<std::uint8_t> mask_for(const Vocabulary& vocab, std::string_view prefix) {
  if (prefix.empty()) return {};
  auto mask = prefix_mask(vocab, prefix);
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; }))
    throw InvalidArgument("no vocabulary word starts with '" + std::string(prefix) + "'");
  return mask;
}

}  // namespace

Suggestion LogLinearPolicy::sample_phrase(std::span<const Token> context, std::size_t length,
                                          Rng& rng, std::string_view first_word_prefix) const {
  if (length == 0) throw InvalidArgument("phrase length must be >= 1");
  const auto& vocab = lm_->vocab();
  auto ctx = encode_context(vocab, context);
  const auto mask = mask_for(vocab, first_word_prefix);
  std::vector<double> dist(vocab.size());
  Suggestion s;
  for (std::size_t t = 0; t < length; ++t) {
    word_distribution(ctx, dist, t == 0 ? std::span<const std::uint8_t>(mask) : std::span<const std::uint8_t>{});
    const WordId w = sample_word(dist, rng);
    s.ids.push_back(w);
    s.words.push_back(vocab.word(w));
    s.per_word_probs.push_back(dist[w]);
    s.propensity *= dist[w];
    ctx.push_back(w);
  }
  return s;
}

double LogLinearPolicy::phrase_probability(std::span<const Token> context,
                                           std::span<const Token> words,
                                           std::string_view first_word_prefix) const {
  if (words.empty()) throw InvalidArgument("phrase must contain at least one word");
  const auto& vocab = lm_->vocab();
  auto ctx = encode_context(vocab, context);
  const auto mask = mask_for(vocab, first_word_prefix);
  std::vector<double> dist(vocab.size());
  double p = 1.0;
  for (std::size_t t = 0; t < words.size(); ++t) {
    word_distribution(ctx, dist, t == 0 ? std::span<const std::uint8_t>(mask) : std::span<const std::uint8_t>{});
    const WordId w = vocab.id(words[t]);
    if (w == vocab.bor()) return 0.0;
    p *= dist[w];
    ctx.push_back(w);
  }
  return p;
}

double LogLinearPolicy::phrase_log_probability(std::span<const Token> context,
                                               std::span<const Token> words,
                                               std::string_view first_word_prefix) const {
  if (words.empty()) throw InvalidArgument("phrase must contain at least one word");
  const auto& vocab = lm_->vocab();
  auto ctx = encode_context(vocab, context);
  const auto mask = mask_for(vocab, first_word_prefix);
  std::vector<double> dist(vocab.size());
  double lp = 0.0;
  for (std::size_t t = 0; t < words.size(); ++t) {
    word_distribution(ctx, dist, t == 0 ? std::span<const std::uint8_t>(mask) : std::span<const std::uint8_t>{});
    const WordId w = vocab.id(words[t]);
    if (w == vocab.bor()) return -std::numeric_limits<double>::infinity();
    lp += std::log(dist[w]);
    ctx.push_back(w);
  }
  return lp;
}

SuggestionSet LogLinearPolicy::generate_suggestion_set(std::span<const Token> context, std::size_t k,
                                                       std::size_t length, Rng& rng,
                                                       std::string_view first_word_prefix) const {
  if (k == 0) throw InvalidArgument("suggestion set size must be >= 1");
  if (length == 0) throw InvalidArgument("phrase length must be >= 1");
  const auto& vocab = lm_->vocab();
  const auto mask = mask_for(vocab, first_word_prefix);
  const std::size_t support =
      mask.empty() ? vocab.size() : static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  if (support < k) throw InvalidArgument("vocabulary is smaller than the suggestion set");

  const auto base_ctx = encode_context(vocab, context);
  std::vector<double> first(vocab.size());
  word_distribution(base_ctx, first, mask);
  const std::size_t positive =
      static_cast<std::size_t>(std::count_if(first.begin(), first.end(), [](double p) { return p > 0.0; }));
  if (positive < k) throw InvalidArgument("fewer candidate first words than suggestions");

  SuggestionSet set;
  set.context.assign(context.begin(), context.end());
  set.first_word_prefix = std::string(first_word_prefix);
  std::vector<std::uint8_t> used(vocab.size(), 0);
  std::vector<double> dist(vocab.size());
  for (std::size_t j = 0; j < k; ++j) {
    WordId w = sample_word(first, rng);
    for (std::size_t attempt = 0; used[w] && attempt < vocab.size(); ++attempt)
      w = sample_word(first, rng);
    if (used[w]) {
      std::vector<double> rest(first);
      double z = 0.0;
      for (std::size_t i = 0; i < rest.size(); ++i) {
        if (used[i]) rest[i] = 0.0;
        z += rest[i];
      }
      for (double& p : rest) p /= z;
      w = sample_word(rest, rng);
    }
    used[w] = 1;

    Suggestion s;
    auto ctx = base_ctx;
    s.ids.push_back(w);
    s.words.push_back(vocab.word(w));
    s.per_word_probs.push_back(first[w]);
    s.propensity *= first[w];
    ctx.push_back(w);
    for (std::size_t t = 1; t < length; ++t) {
      word_distribution(ctx, dist);
      const WordId next = sample_word(dist, rng);
      s.ids.push_back(next);
      s.words.push_back(vocab.word(next));
      s.per_word_probs.push_back(dist[next]);
      s.propensity *= dist[next];
      ctx.push_back(next);
    }
    set.suggestions.push_back(std::move(s));
  }
  return set;
}

}  // namespace sugg
