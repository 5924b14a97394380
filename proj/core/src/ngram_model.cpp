#include "sugg/ngram_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include "sugg/error.hpp"

namespace sugg {
namespace {

constexpr char kMagic[8] = {'S', 'U', 'G', 'G', 'N', 'G', 'R', 'M'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr double kMinDiscount = 0.05;

using Key = std::u32string;

Key make_key(std::span<const WordId> ids) {
  Key k;
  k.reserve(ids.size());
  for (WordId id : ids) k.push_back(static_cast<char32_t>(id));
  return k;
}

// Modified Kneser-Ney discounts from counts-of-counts n1..n4. Degenerate
// statistics fall back to (0.5, 1, 1.5); each discount is clamped into
// [0.05, k] so that adjusted counts stay non-negative and every context
// keeps some interpolation mass.
NgramModel::Discounts estimate_discounts(const std::array<std::uint64_t, 5>& n) {
  NgramModel::Discounts out;
  if (n[1] == 0 || n[2] == 0) {
    out.d = {0.5, 1.0, 1.5};
  } else {
    const double n1 = double(n[1]), n2 = double(n[2]), n3 = double(n[3]), n4 = double(n[4]);
    const double y = n1 / (n1 + 2.0 * n2);
    out.d[0] = 1.0 - 2.0 * y * n2 / n1;
    out.d[1] = 2.0 - 3.0 * y * n3 / n2;
    out.d[2] = n[3] > 0 ? 3.0 - 4.0 * y * n4 / n3 : out.d[1];
  }
  for (int i = 0; i < 3; ++i) out.d[i] = std::clamp(out.d[i], kMinDiscount, double(i + 1));
  return out;
}

double discount_for(const NgramModel::Discounts& d, double count) {
  if (count >= 3.0) return d.d[2];
  if (count >= 2.0) return d.d[1];
  return d.d[0];
}

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated language model file");
  return v;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<Token> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second)
      throw InvalidArgument("duplicate vocabulary word: " + words_[i]);
  }
  const auto unk = index_.find(std::string(kUnk));
  const auto eos = index_.find(std::string(kEos));
  if (unk == index_.end() || eos == index_.end())
    throw InvalidArgument("vocabulary must contain UNK and EOS");
  if (index_.count(std::string(kBor))) throw InvalidArgument("BOR cannot be a predictable word");
  unk_ = unk->second;
  eos_ = eos->second;
}

WordId Vocabulary::id(std::string_view token) const {
  if (token == kBor) return bor();
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_ : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

const Token& Vocabulary::word(WordId id) const {
  static const Token bor_token(kBor);
  if (id == bor()) return bor_token;
  return words_.at(id);
}

std::vector<WordId> Vocabulary::encode(std::span<const Token> tokens) const {
  std::vector<WordId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

NgramModel NgramModel::train(std::span<const Document> docs, int order) {
  if (order < 1) throw InvalidArgument("n-gram order must be >= 1");
  if (docs.empty()) throw InvalidArgument("cannot train a language model on no documents");

  std::set<Token> types{Token(kEos), Token(kUnk)};
  std::size_t targets = 0;
  for (const auto& d : docs) {
    for (const auto& t : d.tokens) {
      if (t == kBor) continue;
      types.insert(t);
      ++targets;
    }
  }
  if (targets < static_cast<std::size_t>(order))
    throw InvalidArgument("corpus has fewer tokens than the n-gram order");

  NgramModel m;
  m.order_ = order;
  m.vocab_ = Vocabulary(std::vector<Token>(types.begin(), types.end()));
  const WordId bor = m.vocab_.bor();

  std::vector<std::vector<WordId>> seqs;
  seqs.reserve(docs.size());
  for (const auto& d : docs) seqs.push_back(m.vocab_.encode(d.tokens));

  m.levels_.resize(order);
  m.discounts_.resize(order);
  for (int k = 1; k <= order; ++k) {
    // Adjusted counts of k-grams ending at each predicted position.
    std::map<Key, double> adjusted;
    std::unordered_set<Key> extensions;
    for (const auto& s : seqs) {
      for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] == bor) continue;
        if (i + 1 < static_cast<std::size_t>(k)) continue;
        const std::size_t start = i + 1 - static_cast<std::size_t>(k);
        const std::span<const WordId> gram(s.data() + start, static_cast<std::size_t>(k));
        if (k == order || start == 0 || s[start] == bor) {
          adjusted[make_key(gram)] += 1.0;
        } else {
          const std::span<const WordId> ext(s.data() + start - 1, static_cast<std::size_t>(k) + 1);
          if (extensions.insert(make_key(ext)).second) adjusted[make_key(gram)] += 1.0;
        }
      }
    }

    std::array<std::uint64_t, 5> coc{};
    for (const auto& [key, a] : adjusted) {
      const auto c = static_cast<std::size_t>(a);
      if (c >= 1 && c <= 4) ++coc[c];
    }
    const Discounts disc = estimate_discounts(coc);
    m.discounts_[k - 1] = disc;

    // std::map iteration groups each context's followers in word-id order.
    Level& level = m.levels_[k - 1];
    auto it = adjusted.begin();
    while (it != adjusted.end()) {
      const Key context = it->first.substr(0, static_cast<std::size_t>(k - 1));
      auto end = it;
      double total = 0.0;
      double n1 = 0, n2 = 0, n3 = 0;
      while (end != adjusted.end() && end->first.compare(0, context.size(), context) == 0) {
        const double a = end->second;
        total += a;
        (a >= 3.0 ? n3 : a >= 2.0 ? n2 : n1) += 1.0;
        ++end;
      }
      ContextEntry entry;
      entry.gamma = (disc.d[0] * n1 + disc.d[1] * n2 + disc.d[2] * n3) / total;
      for (auto f = it; f != end; ++f) {
        entry.words.push_back(static_cast<WordId>(f->first.back()));
        entry.discounted.push_back((f->second - discount_for(disc, f->second)) / total);
      }
      level.emplace(context, std::move(entry));
      it = end;
    }
  }
  return m;
}

std::size_t NgramModel::levels_for(std::size_t context_len) const {
  return std::min<std::size_t>(static_cast<std::size_t>(order_), context_len + 1);
}

const NgramModel::ContextEntry* NgramModel::find(int level, std::span<const WordId> context) const {
  const auto len = static_cast<std::size_t>(level - 1);
  const auto& table = levels_[static_cast<std::size_t>(level - 1)];
  const auto it = table.find(make_key(context.subspan(context.size() - len)));
  return it == table.end() ? nullptr : &it->second;
}

double NgramModel::prob(WordId word, std::span<const WordId> context) const {
  double p = 1.0 / double(vocab_.size());
  const std::size_t levels = levels_for(context.size());
  for (std::size_t k = 1; k <= levels; ++k) {
    const ContextEntry* e = find(static_cast<int>(k), context);
    if (e == nullptr) continue;
    const auto pos = std::lower_bound(e->words.begin(), e->words.end(), word);
    const double disc = (pos != e->words.end() && *pos == word)
                            ? e->discounted[static_cast<std::size_t>(pos - e->words.begin())]
                            : 0.0;
    p = disc + e->gamma * p;
  }
  return p;
}

double NgramModel::log_prob(WordId word, std::span<const WordId> context) const {
  return std::log(prob(word, context));
}

double NgramModel::log_prob(std::string_view word, std::span<const Token> context) const {
  const auto ctx = vocab_.encode(context);
  return log_prob(vocab_.id(word), ctx);
}

void NgramModel::next_distribution(std::span<const WordId> context, std::span<double> out) const {
  if (out.size() != vocab_.size()) throw InvalidArgument("distribution buffer has wrong size");
  std::fill(out.begin(), out.end(), 1.0 / double(vocab_.size()));
  const std::size_t levels = levels_for(context.size());
  for (std::size_t k = 1; k <= levels; ++k) {
    const ContextEntry* e = find(static_cast<int>(k), context);
    if (e == nullptr) continue;
    const double g = e->gamma;
    for (double& v : out) v = g * v;
    for (std::size_t i = 0; i < e->words.size(); ++i) {
      double& v = out[e->words[i]];
      v = e->discounted[i] + v;
    }
  }
}

std::vector<double> NgramModel::next_distribution(std::span<const Token> context) const {
  std::vector<double> out(vocab_.size());
  const auto ctx = vocab_.encode(context);
  next_distribution(ctx, out);
  return out;
}

void NgramModel::next_log_distribution(std::span<const WordId> context,
                                       std::span<double> out) const {
  next_distribution(context, out);
  for (double& v : out) v = std::log(v);
}

double NgramModel::perplexity(std::span<const Document> docs) const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& d : docs) {
    const auto ids = vocab_.encode(d.tokens);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == vocab_.bor()) continue;
      total += log_prob(ids[i], std::span<const WordId>(ids.data(), i));
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("perplexity over an empty corpus");
  return std::exp(-total / double(n));
}

void NgramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put(out, kFormatVersion);
  put(out, static_cast<std::uint32_t>(order_));
  put(out, static_cast<std::uint32_t>(vocab_.size()));
  for (const auto& w : vocab_.words()) {
    put(out, static_cast<std::uint32_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
  }
  for (int k = 1; k <= order_; ++k) {
    for (double d : discounts_[k - 1].d) put(out, d);
    const Level& level = levels_[k - 1];
    std::vector<const Level::value_type*> sorted;
    sorted.reserve(level.size());
    for (const auto& kv : level) sorted.push_back(&kv);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->first < b->first; });
    put(out, static_cast<std::uint64_t>(sorted.size()));
    for (const auto* kv : sorted) {
      for (char32_t c : kv->first) put(out, static_cast<std::uint32_t>(c));
      put(out, kv->second.gamma);
      put(out, static_cast<std::uint32_t>(kv->second.words.size()));
      for (std::size_t i = 0; i < kv->second.words.size(); ++i) {
        put(out, kv->second.words[i]);
        put(out, kv->second.discounted[i]);
      }
    }
  }
  if (!out) throw IoError("short write to " + path.string());
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError(path.string() + " is not a language model file");
  if (get<std::uint32_t>(in) != kFormatVersion)
    throw IoError("unsupported language model format version");
  NgramModel m;
  m.order_ = static_cast<int>(get<std::uint32_t>(in));
  if (m.order_ < 1) throw IoError("invalid n-gram order in model file");
  const auto vsize = get<std::uint32_t>(in);
  std::vector<Token> words(vsize);
  for (auto& w : words) {
    const auto len = get<std::uint32_t>(in);
    w.resize(len);
    in.read(w.data(), len);
    if (!in) throw IoError("truncated vocabulary block");
  }
  try {
    m.vocab_ = Vocabulary(std::move(words));
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("bad vocabulary block: ") + e.what());
  }
  m.levels_.resize(static_cast<std::size_t>(m.order_));
  m.discounts_.resize(static_cast<std::size_t>(m.order_));
  for (int k = 1; k <= m.order_; ++k) {
    for (double& d : m.discounts_[k - 1].d) d = get<double>(in);
    const auto contexts = get<std::uint64_t>(in);
    Level& level = m.levels_[k - 1];
    level.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(contexts, 1u << 20)));
    for (std::uint64_t c = 0; c < contexts; ++c) {
      Key key;
      for (int j = 0; j < k - 1; ++j) key.push_back(static_cast<char32_t>(get<std::uint32_t>(in)));
      ContextEntry e;
      e.gamma = get<double>(in);
      const auto followers = get<std::uint32_t>(in);
      e.words.resize(followers);
      e.discounted.resize(followers);
      for (std::uint32_t i = 0; i < followers; ++i) {
        e.words[i] = get<WordId>(in);
        e.discounted[i] = get<double>(in);
        if (e.words[i] >= vsize) throw IoError("follower id out of range");
      }
      level.emplace(std::move(key), std::move(e));
    }
  }
  return m;
}

}  // namespace sugg
