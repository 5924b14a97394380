#pragma once

#include <string>
#include <string_view>

namespace sugg {

using Token = std::string;

// Distinguished marker tokens. BOR opens every document; EOS closes every
// sentence. BOS is reserved for callers that want explicit sentence starts;
// the tokenizer never emits it. UNK stands in for out-of-vocabulary words.
inline constexpr std::string_view kBor = "<r>";
inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

inline bool is_marker(std::string_view t) {
  return t == kBor || t == kBos || t == kEos || t == kUnk;
}

}  // namespace sugg
