#!/usr/bin/env python3
"""Generates the bundled restaurant-review corpus.

The corpus is produced by a small probabilistic grammar so it can be
redistributed freely. Every generated word carries its part-of-speech tag,
which gives a tagged reference corpus; the bundled lexicon is the majority
tag per word type over that corpus.

Outputs (all deterministic for a given --seed):
  reviews.txt          one review per line, natural casing and punctuation
  tagged_reference.txt one review per line, space-separated word/TAG tokens
  pos_lexicon.tsv      word<TAB>TAG, majority tag per lowercased word type

Usage: python3 make_corpus.py [--reviews N] [--seed S] [--out DIR]
"""

import argparse
import collections
import os
import random

# Phrase banks. Each entry is a string of word/TAG tokens.
BANKS = {
    "place": [
        "place/NOUN", "restaurant/NOUN", "spot/NOUN", "joint/NOUN",
        "bar/NOUN", "diner/NOUN", "cafe/NOUN", "bistro/NOUN", "taqueria/NOUN",
        "pizzeria/NOUN", "establishment/NOUN", "kitchen/NOUN", "eatery/NOUN",
        "steakhouse/NOUN", "brewery/NOUN", "bakery/NOUN",
    ],
    "dish": [
        "burrito/NOUN", "pizza/NOUN", "burger/NOUN", "salad/NOUN",
        "sandwich/NOUN", "steak/NOUN", "pasta/NOUN", "soup/NOUN", "tacos/NOUN",
        "fries/NOUN", "wings/NOUN", "chicken/NOUN", "salmon/NOUN",
        "noodles/NOUN", "curry/NOUN", "brisket/NOUN", "ramen/NOUN",
        "dumplings/NOUN", "enchiladas/NOUN", "guacamole/NOUN", "chips/NOUN",
        "salsa/NOUN", "burritos/NOUN", "bread/NOUN", "dessert/NOUN",
        "cheesecake/NOUN", "pancakes/NOUN", "omelette/NOUN", "waffles/NOUN",
        "sushi/NOUN", "shrimp/NOUN", "lobster/NOUN", "meatballs/NOUN",
        "lasagna/NOUN", "risotto/NOUN", "carnitas/NOUN", "barbacoa/NOUN",
        "quesadilla/NOUN", "nachos/NOUN", "coffee/NOUN", "latte/NOUN",
        "margarita/NOUN", "beer/NOUN", "wine/NOUN", "cocktails/NOUN",
        "rice/NOUN", "beans/NOUN", "pork/NOUN", "ribs/NOUN", "bacon/NOUN",
        "eggs/NOUN", "fish/NOUN", "oysters/NOUN", "calamari/NOUN",
        "appetizers/NOUN", "sausage/NOUN", "gelato/NOUN", "pie/NOUN",
    ],
    "food_adj": [
        "delicious/ADJ", "tasty/ADJ", "fresh/ADJ", "amazing/ADJ", "great/ADJ",
        "good/ADJ", "bland/ADJ", "greasy/ADJ", "flavorful/ADJ", "perfect/ADJ",
        "excellent/ADJ", "incredible/ADJ", "authentic/ADJ", "spicy/ADJ",
        "cold/ADJ", "soggy/ADJ", "crispy/ADJ", "tender/ADJ", "juicy/ADJ",
        "overcooked/ADJ", "salty/ADJ", "sweet/ADJ", "hot/ADJ", "decent/ADJ",
        "mediocre/ADJ", "outstanding/ADJ", "savory/ADJ", "generous/ADJ",
        "huge/ADJ", "small/ADJ", "wonderful/ADJ", "fantastic/ADJ",
        "homemade/ADJ", "traditional/ADJ", "southern/ADJ", "creamy/ADJ",
        "rich/ADJ", "smoky/ADJ", "dry/ADJ", "fine/ADJ", "solid/ADJ",
        "average/ADJ", "terrible/ADJ", "awful/ADJ", "nice/ADJ",
    ],
    "service_adj": [
        "friendly/ADJ", "slow/ADJ", "attentive/ADJ", "rude/ADJ", "quick/ADJ",
        "helpful/ADJ", "professional/ADJ", "great/ADJ", "fast/ADJ",
        "excellent/ADJ", "terrible/ADJ", "courteous/ADJ", "welcoming/ADJ",
        "efficient/ADJ", "nice/ADJ", "polite/ADJ", "good/ADJ", "awesome/ADJ",
        "knowledgeable/ADJ", "patient/ADJ", "sweet/ADJ", "inattentive/ADJ",
    ],
    "atmos_adj": [
        "cozy/ADJ", "loud/ADJ", "clean/ADJ", "dirty/ADJ", "crowded/ADJ",
        "relaxed/ADJ", "beautiful/ADJ", "modern/ADJ", "charming/ADJ",
        "comfortable/ADJ", "noisy/ADJ", "quiet/ADJ", "spacious/ADJ",
        "local/ADJ", "small/ADJ", "casual/ADJ", "romantic/ADJ", "lively/ADJ",
        "dark/ADJ", "bright/ADJ", "rustic/ADJ", "trendy/ADJ",
    ],
    "staff": [
        "staff/NOUN", "server/NOUN", "waitress/NOUN", "waiter/NOUN",
        "bartender/NOUN", "manager/NOUN", "owner/NOUN", "hostess/NOUN",
        "cashier/NOUN", "service/NOUN", "crew/NOUN", "cooks/NOUN",
        "employees/NOUN", "chef/NOUN",
    ],
    "person": [
        "husband/NOUN", "wife/NOUN", "friend/NOUN", "friends/NOUN",
        "family/NOUN", "girlfriend/NOUN", "boyfriend/NOUN", "kids/NOUN",
        "coworkers/NOUN", "parents/NOUN", "sister/NOUN", "brother/NOUN",
        "roommate/NOUN", "date/NOUN",
    ],
    "time": [
        "lunch/NOUN", "dinner/NOUN", "breakfast/NOUN", "brunch/NOUN",
        "happy/ADJ hour/NOUN", "a/DET late/ADJ night/NOUN snack/NOUN",
        "a/DET birthday/NOUN dinner/NOUN", "a/DET quick/ADJ bite/NOUN",
        "takeout/NOUN", "dessert/NOUN", "a/DET date/NOUN night/NOUN",
    ],
    "day": [
        "friday/NOUN", "saturday/NOUN", "sunday/NOUN", "monday/NOUN",
        "tuesday/NOUN", "wednesday/NOUN", "thursday/NOUN", "weekend/NOUN",
        "night/NOUN", "morning/NOUN", "afternoon/NOUN", "evening/NOUN",
    ],
    "intens": [
        "really/ADV", "very/ADV", "so/ADV", "super/ADV", "pretty/ADV",
        "extremely/ADV", "incredibly/ADV", "quite/ADV", "absolutely/ADV",
        "surprisingly/ADV", "always/ADV", "definitely/ADV", "totally/ADV",
        "especially/ADV", "fairly/ADV", "genuinely/ADV",
    ],
    "love_verb": [
        "love/VERB", "loved/VERB", "enjoyed/VERB", "liked/VERB", "adore/VERB",
        "recommend/VERB", "appreciate/VERB", "hated/VERB", "tried/VERB",
        "ordered/VERB", "devoured/VERB", "shared/VERB", "got/VERB",
    ],
    "num": [
        "two/NUM", "three/NUM", "four/NUM", "five/NUM", "ten/NUM", "20/NUM",
        "15/NUM", "30/NUM", "45/NUM", "twenty/NUM", "several/ADJ",
    ],
    "unit": [
        "minutes/NOUN", "dollars/NOUN", "times/NOUN", "stars/NOUN",
    ],
    "event": [
        "sporting/VERB events/NOUN", "football/NOUN games/NOUN",
        "live/ADJ music/NOUN", "trivia/NOUN night/NOUN",
        "the/DET holidays/NOUN", "graduation/NOUN weekend/NOUN",
        "the/DET game/NOUN", "rush/NOUN hour/NOUN",
    ],
    "place_adj": [
        "great/ADJ local/ADJ", "little/ADJ", "new/ADJ", "favorite/ADJ",
        "neighborhood/NOUN", "popular/ADJ", "busy/ADJ", "hidden/ADJ",
        "family/NOUN owned/VERB", "mexican/ADJ", "italian/ADJ",
        "chinese/ADJ", "thai/ADJ", "american/ADJ", "japanese/ADJ",
        "local/ADJ", "upscale/ADJ", "cheap/ADJ",
    ],
    "city": [
        "town/NOUN", "the/DET city/NOUN", "the/DET area/NOUN",
        "the/DET neighborhood/NOUN", "downtown/NOUN", "phoenix/NOUN",
        "vegas/NOUN", "the/DET valley/NOUN", "the/DET world/NOUN",
    ],
    "price_adj": [
        "reasonable/ADJ", "cheap/ADJ", "expensive/ADJ", "affordable/ADJ",
        "fair/ADJ", "high/ADJ", "steep/ADJ", "overpriced/ADJ", "low/ADJ",
    ],
    "conj": ["and/CONJ", "but/CONJ", "and/CONJ", "and/CONJ", "or/CONJ"],
}

# Sentence templates: literal word/TAG tokens or {bank} references.
# A trailing punctuation token ends each sentence.
TEMPLATES = [
    ("i/PRON {love_verb} this/DET {place} !/PUNCT", 3),
    ("i/PRON {love_verb} this/DET {place} ./PUNCT", 3),
    ("i/PRON am/VERB a/DET huge/ADJ sucker/NOUN for/ADP {dish} ./PUNCT", 1),
    ("this/DET is/VERB my/PRON {place_adj} {place} in/ADP {city} ./PUNCT", 3),
    ("this/DET {place} is/VERB {intens} {atmos_adj} ./PUNCT", 3),
    ("the/DET {dish} was/VERB {intens} {food_adj} ./PUNCT", 6),
    ("the/DET {dish} was/VERB {food_adj} {conj} the/DET {dish} was/VERB {food_adj} ./PUNCT", 3),
    ("the/DET {dish} and/CONJ {dish} were/VERB {food_adj} ./PUNCT", 3),
    ("the/DET {staff} was/VERB {intens} {service_adj} ./PUNCT", 5),
    ("our/PRON {staff} was/VERB {service_adj} and/CONJ {service_adj} ./PUNCT", 3),
    ("we/PRON came/VERB here/ADV for/ADP {time} on/ADP {day} ./PUNCT", 4),
    ("my/PRON {person} and/CONJ i/PRON came/VERB here/ADV for/ADP {time} ./PUNCT", 3),
    ("i/PRON came/VERB here/ADV with/ADP my/PRON {person} ./PUNCT", 2),
    ("i/PRON ordered/VERB the/DET {dish} with/ADP {dish} ./PUNCT", 4),
    ("i/PRON got/VERB the/DET {dish} and/CONJ it/PRON was/VERB {food_adj} ./PUNCT", 4),
    ("i/PRON had/VERB the/DET {dish} and/CONJ my/PRON {person} had/VERB the/DET {dish} ./PUNCT", 3),
    ("we/PRON waited/VERB {num} {unit} for/ADP our/PRON food/NOUN ./PUNCT", 2),
    ("prices/NOUN are/VERB {price_adj} for/ADP the/DET portion/NOUN sizes/NOUN ./PUNCT", 2),
    ("the/DET prices/NOUN are/VERB {intens} {price_adj} ./PUNCT", 2),
    ("it/PRON was/VERB about/ADV {num} {unit} for/ADP two/NUM people/NOUN ./PUNCT", 1),
    ("the/DET atmosphere/NOUN is/VERB {atmos_adj} and/CONJ {atmos_adj} ./PUNCT", 3),
    ("it/PRON gets/VERB {intens} {atmos_adj} during/ADP {event} ./PUNCT", 2),
    ("another/DET {place} {intens} {atmos_adj} during/ADP {event} ./PUNCT", 1),
    ("great/ADJ {place_adj} {place} and/CONJ {food_adj} {dish} ./PUNCT", 2),
    ("i/PRON will/VERB definitely/ADV be/VERB back/ADV !/PUNCT", 3),
    ("i/PRON will/VERB definitely/ADV be/VERB back/ADV ./PUNCT", 2),
    ("we/PRON will/VERB be/VERB back/ADV for/ADP {time} ./PUNCT", 2),
    ("i/PRON would/VERB not/PRT come/VERB back/ADV ./PUNCT", 1),
    ("i/PRON would/VERB {intens} recommend/VERB this/DET {place} ./PUNCT", 3),
    ("highly/ADV recommend/VERB the/DET {dish} !/PUNCT", 3),
    ("you/PRON have/VERB to/PRT try/VERB the/DET {dish} !/PUNCT", 3),
    ("do/VERB not/PRT miss/VERB the/DET {dish} ./PUNCT", 1),
    ("five/NUM stars/NOUN !/PUNCT", 1),
    ("{num} stars/NOUN for/ADP the/DET {dish} ./PUNCT", 1),
    ("the/DET portions/NOUN are/VERB {intens} {food_adj} ,/PUNCT so/ADV bring/VERB an/DET appetite/NOUN ./PUNCT", 1),
    ("parking/NOUN can/VERB be/VERB {intens} difficult/ADJ on/ADP {day} ./PUNCT", 1),
    ("i/PRON didn't/VERB see/VERB a/DET sign/NOUN for/ADP the/DET {dish} ./PUNCT", 1),
    ("overall/ADV ,/PUNCT a/DET {food_adj} experience/NOUN ./PUNCT", 2),
    ("overall/ADV ,/PUNCT {intens} {food_adj} food/NOUN and/CONJ {service_adj} service/NOUN ./PUNCT", 2),
    ("this/DET was/VERB truly/ADV a/DET {food_adj} experience/NOUN ./PUNCT", 1),
    ("the/DET {dish} is/VERB {intens} {food_adj} ,/PUNCT but/CONJ the/DET {dish} is/VERB {food_adj} ./PUNCT", 2),
    ("if/ADP you/PRON like/VERB {dish} ,/PUNCT this/DET is/VERB your/PRON {place} ./PUNCT", 2),
    ("they/PRON have/VERB {intens} {food_adj} {dish} ./PUNCT", 3),
    ("their/PRON {dish} is/VERB the/DET best/ADJ in/ADP {city} ./PUNCT", 3),
    ("service/NOUN was/VERB {service_adj} ,/PUNCT food/NOUN was/VERB {food_adj} ./PUNCT", 2),
    ("what/PRON a/DET {food_adj} {place} !/PUNCT", 1),
    ("so/ADV {food_adj} !/PUNCT", 1),
    ("we/PRON sat/VERB at/ADP the/DET bar/NOUN and/CONJ {love_verb} the/DET {dish} ./PUNCT", 1),
    ("the/DET {staff} recommended/VERB the/DET {dish} and/CONJ it/PRON was/VERB {food_adj} ./PUNCT", 2),
    ("it/PRON is/VERB {intens} {atmos_adj} inside/ADV ,/PUNCT especially/ADV on/ADP {day} ./PUNCT", 1),
    ("my/PRON only/ADJ complaint/NOUN is/VERB that/ADP the/DET {dish} was/VERB {food_adj} ./PUNCT", 1),
    ("the/DET {dish} came/VERB out/PRT {food_adj} and/CONJ {food_adj} ./PUNCT", 2),
]

OPENER_WEIGHT = {0, 1, 2, 3, 4, 10, 11, 12, 46}


def expand(tmpl, rng):
    out = []
    for part in tmpl.split():
        if part.startswith("{"):
            phrase = rng.choice(BANKS[part[1:-1]])
            out.extend(tok.rsplit("/", 1) for tok in phrase.split())
        else:
            out.append(part.rsplit("/", 1))
    return out


def render(tagged):
    """Joins word/tag pairs into natural text with cased sentence starts."""
    text = ""
    start = True
    for word, _tag in tagged:
        w = word.capitalize() if start else word
        if word == "i":
            w = "I"
        if word in ".,!?" or not text:
            text += w
        else:
            text += " " + w
        start = word in ".!?"
    return text


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reviews", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=20170301)
    ap.add_argument("--out", default=os.path.dirname(os.path.abspath(__file__)))
    args = ap.parse_args()
    rng = random.Random(args.seed)

    weights = [w for _, w in TEMPLATES]
    opener_weights = [w * (4 if i in OPENER_WEIGHT else 1) for i, (_, w) in enumerate(TEMPLATES)]

    reviews, tagged_lines = [], []
    counts = collections.defaultdict(collections.Counter)
    for _ in range(args.reviews):
        n_sent = rng.choice([2, 3, 3, 4, 4, 5, 5, 6, 7])
        tagged = []
        for s in range(n_sent):
            ws = opener_weights if s == 0 else weights
            tmpl = rng.choices(TEMPLATES, weights=ws)[0][0]
            tagged.extend(expand(tmpl, rng))
        reviews.append(render(tagged))
        tagged_lines.append(" ".join(f"{w}/{t}" for w, t in tagged))
        for w, t in tagged:
            counts[w][t] += 1

    with open(os.path.join(args.out, "reviews.txt"), "w") as f:
        f.write("\n".join(reviews) + "\n")
    with open(os.path.join(args.out, "tagged_reference.txt"), "w") as f:
        f.write("\n".join(tagged_lines) + "\n")
    with open(os.path.join(args.out, "pos_lexicon.tsv"), "w") as f:
        for w in sorted(counts):
            # Majority tag; ties broken alphabetically for determinism.
            tag = sorted(counts[w].items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
            f.write(f"{w}\t{tag}\n")
        f.write("</s>\tPUNCT\n")


if __name__ == "__main__":
    main()
