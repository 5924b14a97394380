#pragma once

#include <string>
#include <vector>

#include "sugg/tokens.hpp"

namespace sugg {

/// One logged (context, action, reward, propensity) tuple.
struct LoggedInteraction {
  std::vector<Token> context;
  std::vector<Token> action;
  double reward = 0.0;
  double propensity = 1.0;
  std::string group;              // cross-validation unit (source document)
  std::string first_word_prefix;  // non-empty for mid-word suggestions
};

}  // namespace sugg
