#!/usr/bin/env python3
"""Reference interpolated modified Kneser-Ney probabilities for small corpora.

Computes everything by direct counting over explicit token lists and writes
a C++ header of expected values (tests/fixtures/kn_oracle_values.hpp).
Conventions: documents begin with <r>, which conditions but is never
predicted; the vocabulary is every predicted type plus <unk> and </s>; the
highest order uses raw counts, lower orders use the number of distinct left
neighbours except for n-grams starting with <r>, which keep raw counts.

    python3 kn_oracle.py > ../fixtures/kn_oracle_values.hpp
"""
from collections import defaultdict

BOR, EOS, UNK = "<r>", "</s>", "<unk>"

CORPORA = {
    "abab": {
        "order": 2,
        "docs": [[BOR, "a", "b", "a", "b", EOS]],
        "queries": [[], [BOR], ["a"], ["b"], ["zz"]],
    },
    "cats": {
        "order": 3,
        "docs": [
            [BOR, "the", "cat", "sat", ".", EOS, "the", "dog", "sat", "on", "the", "mat", ".", EOS],
            [BOR, "a", "cat", "ran", "!", EOS],
            [BOR, "the", "cat", "ran", "on", "the", "mat", ".", EOS],
            [BOR, "the", "dog", "ran", ".", EOS, "a", "dog", "sat", ".", EOS],
        ],
        "queries": [[], [BOR], [BOR, "the"], ["the"], ["the", "cat"], ["on", "the"],
                    ["cat", "sat"], ["mat", "."], ["zebra"], ["the", "zebra"], [".", EOS]],
    },
}


def discounts(counts):
    n = defaultdict(int)
    for c in counts.values():
        if 1 <= c <= 4:
            n[c] += 1
    if n[1] == 0 or n[2] == 0:
        d = [0.5, 1.0, 1.5]
    else:
        y = n[1] / (n[1] + 2 * n[2])
        d1 = 1 - 2 * y * n[2] / n[1]
        d2 = 2 - 3 * y * n[3] / n[2]
        d3 = 3 - 4 * y * n[4] / n[3] if n[3] > 0 else d2
        d = [d1, d2, d3]
    return [min(max(x, 0.05), float(i + 1)) for i, x in enumerate(d)]


class Oracle:
    def __init__(self, docs, order):
        self.order = order
        types = {EOS, UNK}
        for d in docs:
            types.update(t for t in d if t != BOR)
        self.vocab = sorted(types)
        self.counts = {}  # level -> {gram tuple: adjusted count}
        for k in range(1, order + 1):
            raw = defaultdict(int)
            left = defaultdict(set)
            for d in docs:
                for i in range(1, len(d)):
                    if d[i] == BOR or i + 1 < k:
                        continue
                    gram = tuple(d[i + 1 - k:i + 1])
                    start = i + 1 - k
                    if k == order or start == 0 or gram[0] == BOR:
                        raw[gram] += 1
                    else:
                        left[gram].add(d[start - 1])
            table = dict(raw)
            for g, s in left.items():
                table[g] = len(s)
            self.counts[k] = table
        self.disc = {k: discounts(self.counts[k]) for k in self.counts}

    def level_prob(self, k, w, ctx):
        if k == 0:
            return 1.0 / len(self.vocab)
        h = tuple(ctx[len(ctx) - (k - 1):]) if k > 1 else ()
        lower = self.level_prob(k - 1, w, ctx)
        followers = {g[-1]: c for g, c in self.counts[k].items() if g[:-1] == h}
        if not followers:
            return lower
        total = sum(followers.values())
        d = self.disc[k]
        dk = lambda c: d[2] if c >= 3 else d[1] if c >= 2 else d[0]
        gamma = sum(dk(c) for c in followers.values()) / total
        c = followers.get(w, 0)
        first = (c - dk(c)) / total if c > 0 else 0.0
        return first + gamma * lower

    def prob(self, w, ctx):
        ctx = [t if (t == BOR or t in self.vocab) else UNK for t in ctx]
        w = w if w in self.vocab else UNK
        return self.level_prob(min(self.order, len(ctx) + 1), w, ctx)


def cxx_string(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def main():
    print("#pragma once")
    print("// Generated by tests/oracles/kn_oracle.py; do not edit.")
    print("#include <vector>\n#include <string>\n")
    print("namespace kn_oracle {\n")
    print("struct Query { std::vector<std::string> context; std::string word; double prob; };")
    print("struct Case {\n  int order;\n  std::vector<std::vector<std::string>> docs;\n"
          "  std::vector<double> discounts;  // level-major, 3 per level\n"
          "  std::vector<Query> queries;\n};\n")
    for name, case in CORPORA.items():
        o = Oracle(case["docs"], case["order"])
        print(f"inline const Case {name} = {{")
        print(f"  {case['order']},")
        print("  {" + ", ".join("{" + ", ".join(cxx_string(t) for t in d) + "}" for d in case["docs"]) + "},")
        print("  {" + ", ".join(f"{x!r}" for k in range(1, o.order + 1) for x in o.disc[k]) + "},")
        print("  {")
        for ctx in case["queries"]:
            total = 0.0
            for w in o.vocab:
                p = o.prob(w, ctx)
                total += p
                ctx_s = "{" + ", ".join(cxx_string(t) for t in ctx) + "}"
                print(f"    {{{ctx_s}, {cxx_string(w)}, {p!r}}},")
            assert abs(total - 1.0) < 1e-12, (name, ctx, total)
        print("  },\n};\n")
    print("}  // namespace kn_oracle")


if __name__ == "__main__":
    main()
