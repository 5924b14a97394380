#pragma once
// Generated by tests/oracles/policy_oracle.py; do not edit.
#include <array>
#include <string>
#include <vector>

namespace policy_oracle {

inline const std::vector<std::vector<std::string>> toy_docs = {{"<r>", "sucker", "sucker", "</s>"}, {"<r>", "sucker", "</s>"}, {"<r>", "</s>"}};
inline constexpr int toy_order = 2;
inline constexpr std::array<double, 14> theta = {1.5, 0.8, -0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0, 0.3};
inline constexpr std::array<double, 3> first_word = {0.3144064500964636, 0.07318323791281571, 0.6124103119907207};
struct Phrase { const char* w1; const char* w2; double prob; };
inline const std::vector<Phrase> phrases = {
  {"</s>", "</s>", 0.054465705316868875},
  {"</s>", "<unk>", 0.02774720586434366},
  {"</s>", "sucker", 0.2321935389152511},
  {"<unk>", "</s>", 0.01267778275245556},
  {"<unk>", "<unk>", 0.006458615488209978},
  {"<unk>", "sucker", 0.05404683967215018},
  {"sucker", "</s>", 0.05649593040298598},
  {"sucker", "<unk>", 0.028781491073498925},
  {"sucker", "sucker", 0.5271328905142358},
};
inline constexpr std::array<double, 3> softmax3 = {0.7310585786300049, 0.16136485282199708, 0.10757656854799806};

}  // namespace policy_oracle
