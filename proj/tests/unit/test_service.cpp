#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <json.hpp>
#include <regex>
#include <thread>
#include <unordered_set>

#include "sugg/error.hpp"
#include "sugg/service.hpp"
#include "sugg/util.hpp"
#include "unit/helpers.hpp"

using namespace sugg;
using nlohmann::json;

namespace {

std::shared_ptr<const ServiceModel> model() {
  static const auto m = [] {
    const auto& b = testing::bundled();
    const auto w = PolicyWeights::reference();
    return make_service_model(b.lm, b.features, w, "reference:" + w.hash());
  }();
  return m;
}

std::filesystem::path fresh(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove(p);
  return p;
}

struct Harness {
  std::filesystem::path log_path;
  std::shared_ptr<std::atomic<std::int64_t>> clock = std::make_shared<std::atomic<std::int64_t>>(1000);
  std::shared_ptr<ServiceCore> core;

  explicit Harness(const std::string& name, ServiceConfig cfg = {}, bool loaded = true)
      : log_path(fresh(name)) {
    cfg.seed = cfg.seed ? cfg.seed : 7;
    auto c = clock;
    core = std::make_shared<ServiceCore>(cfg, std::make_shared<LogStore>(log_path),
                                         [c] { return c->load(); });
    if (loaded) core->set_model(model());
  }

  std::string session() {
    const auto r = core->create_session("{}");
    REQUIRE(r.status == 200);
    return json::parse(r.body)["session_id"];
  }
  json suggest(const std::string& sid, std::vector<std::string> ctx, bool mid = false, int expect = 200) {
    const auto r = core->suggestions(json{{"session_id", sid}, {"context_tokens", ctx}, {"mid_word", mid}}.dump());
    CHECK(r.status == expect);
    return json::parse(r.body);
  }
  ApiResponse event(const std::string& sid, const std::string& rid, const std::string& action,
                    std::optional<int> slot = std::nullopt, std::optional<int> words = std::nullopt) {
    json b{{"session_id", sid}, {"request_id", rid}, {"action", action}};
    if (slot) b["slot"] = *slot;
    if (words) b["words_accepted"] = *words;
    return core->events(b.dump());
  }
  std::vector<LogRecord> records() const { return read_log(log_path).records; }
};

}  // namespace

TEST_CASE("session ids are UUIDv4 and distinct") {
  const std::regex uuid("^[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}$");
  CHECK(std::regex_match(new_session_id(), uuid));
  std::unordered_set<std::string> ids;
  ids.reserve(1000000);
  for (int i = 0; i < 1000000; ++i) ids.insert(new_session_id());
  CHECK(ids.size() == 1000000);
}

TEST_CASE("display text") {
  CHECK(display_text(std::vector<Token>{"the", "food", "was", "great", "!", "</s>"}) == "the food was great!");
  CHECK(display_text(std::vector<Token>{"<r>", "hi", ",", "there"}) == "hi, there");
  CHECK(display_text(std::vector<Token>{}) == "");
}

TEST_CASE("service config parsing") {
  const auto c = ServiceConfig::from_json(
      R"({"port": 9000, "lm": "lm.bin", "lexicon": "/abs/lex.tsv", "K": 4, "L": 5, "tau": 0.7,
          "session_timeout_s": 2.5, "allowed_origin": "http://x", "seed": 3})",
      "/base");
  CHECK(c.port == 9000);
  CHECK(c.lm_path == std::filesystem::path("/base/lm.bin"));
  CHECK(c.lexicon_path == std::filesystem::path("/abs/lex.tsv"));
  CHECK(c.suggestions_per_set == 4);
  CHECK(c.suggestion_length == 5);
  CHECK(c.tau == 0.7);
  CHECK(c.session_timeout_ms == 2500);
  CHECK(c.allowed_origin == "http://x");
  CHECK(c.seed == 3);
  const ServiceConfig d;
  CHECK(d.suggestions_per_set == 3);
  CHECK(d.suggestion_length == 6);
  CHECK(d.tau == 0.5);
  CHECK(d.session_timeout_ms == 1800000);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"colour": 1})"), InvalidArgument);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"port": "x"})"), InvalidArgument);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"port": 70000})"), InvalidArgument);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"K": 0})"), InvalidArgument);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"tau": 0})"), InvalidArgument);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"session_timeout_s": 0})"), InvalidArgument);
  CHECK_THROWS_AS(ServiceConfig::from_json("[1]"), ParseError);
}

TEST_CASE("loading model from files tags the policy") {
  const auto& b = testing::bundled();
  const auto dir = std::filesystem::temp_directory_path() / "sugg_service_model";
  std::filesystem::create_directories(dir);
  b.lm.save(dir / "lm.bin");
  PolicyWeights w = PolicyWeights::reference();
  w.theta[kLongWordFeature] = 1.25;
  w.save(dir / "weights.txt");
  write_file(dir / "service.json", json{{"lm", "lm.bin"},
                                        {"lexicon", testing::data("pos_lexicon.tsv").string()},
                                        {"weights", "weights.txt"}}
                                       .dump());
  const auto cfg = ServiceConfig::load(dir / "service.json");
  const auto m = load_service_model(cfg);
  CHECK(m->policy_tag == "weights:" + file_hash(dir / "weights.txt"));
  CHECK(m->policy->weights() == w);
  auto ref_cfg = cfg;
  ref_cfg.weights_path.clear();
  ref_cfg.tau = 0.25;
  const auto r = load_service_model(ref_cfg);
  CHECK(r->policy_tag == "reference:" + PolicyWeights::reference(0.25).hash());
  ref_cfg.lm_path = dir / "missing.bin";
  CHECK_THROWS_AS(load_service_model(ref_cfg), IoError);
}

TEST_CASE("requests before the model is loaded get 503") {
  Harness h("sugg_service_503.jsonl", {}, false);
  CHECK_FALSE(h.core->ready());
  CHECK(h.core->create_session("{}").status == 503);
  CHECK(h.core->suggestions(R"({"session_id":"x"})").status == 503);
  CHECK(h.core->policy().status == 503);
  const auto health = h.core->health();
  CHECK(health.status == 503);
  CHECK(json::parse(health.body)["status"] == "loading");
  h.core->set_model(model());
  CHECK(h.core->ready());
  CHECK(h.core->health().status == 200);
}

TEST_CASE("session creation is idempotent per client token") {
  Harness h("sugg_service_token.jsonl");
  const auto a = json::parse(h.core->create_session(R"({"client_token":"tab-1"})").body);
  const auto b = json::parse(h.core->create_session(R"({"client_token":"tab-1"})").body);
  const auto c = json::parse(h.core->create_session(R"({"client_token":"tab-2"})").body);
  CHECK(a["session_id"] == b["session_id"]);
  CHECK(a["session_id"] != c["session_id"]);
  CHECK(a["policy"] == model()->policy_tag);
  CHECK(h.core->session_count() == 2);
  CHECK(h.core->create_session("not json").status == 400);
}

TEST_CASE("accept logs K records with the reward in the accepted slot") {
  Harness h("sugg_service_accept.jsonl");
  const auto sid = h.session();
  const auto s = h.suggest(sid, {"The", "food"});
  REQUIRE(s["suggestions"].size() == 3);
  CHECK(s["mid_word"] == false);
  std::unordered_set<std::string> firsts;
  for (const auto& sug : s["suggestions"]) {
    CHECK(sug["words"].size() == 6);
    firsts.insert(sug["words"][0].get<std::string>());
  }
  CHECK(firsts.size() == 3);
  CHECK(h.core->pending_count() == 1);

  const std::string rid = s["request_id"];
  const auto ev = h.event(sid, rid, "accept", 1);
  REQUIRE(ev.status == 200);
  const auto body = json::parse(ev.body);
  CHECK(body["records"] == 3);
  CHECK(body["rewards"] == json::array({0.0, 6.0, 0.0}));
  CHECK(h.core->pending_count() == 0);

  const auto recs = h.records();
  REQUIRE(recs.size() == 3);
  const auto& policy = *model()->policy;
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(recs[j].session_id == sid);
    CHECK(recs[j].event_index == 0);
    CHECK(recs[j].slot == j);
    CHECK(recs[j].context == std::vector<Token>{"<r>", "the", "food"});
    CHECK(recs[j].words == s["suggestions"][j]["words"].get<std::vector<Token>>());
    CHECK(recs[j].generator == model()->policy_tag);
    CHECK(recs[j].timestamp_ms == 1000);
    CHECK(recs[j].propensity == policy.phrase_probability(recs[j].context, recs[j].words));
    CHECK_FALSE(recs[j].mid_word);
  }
  CHECK(recs[1].reward == 6.0);

  CHECK(h.event(sid, rid, "accept", 1).status == 409);
  CHECK(h.event(sid, rid, "reject").status == 409);
  CHECK(h.event(sid, "nope-1", "reject").status == 404);
  CHECK(h.event("no-such-session", rid, "reject").status == 404);
  CHECK(h.records().size() == 3);
}

TEST_CASE("partial acceptance and rejection") {
  Harness h("sugg_service_partial.jsonl");
  const auto sid = h.session();
  auto s = h.suggest(sid, {"i", "love"});
  CHECK(h.event(sid, s["request_id"], "accept", 2, 0).status == 400);
  CHECK(h.event(sid, s["request_id"], "accept", 2, 7).status == 400);
  CHECK(h.event(sid, s["request_id"], "accept", 3).status == 400);
  CHECK(h.event(sid, s["request_id"], "accept").status == 400);
  CHECK(h.event(sid, s["request_id"], "maybe").status == 400);
  const auto ok = json::parse(h.event(sid, s["request_id"], "accept", 2, 2).body);
  CHECK(ok["rewards"] == json::array({0.0, 0.0, 2.0}));
  s = h.suggest(sid, {"i", "love", "the"});
  const auto rej = json::parse(h.event(sid, s["request_id"], "reject").body);
  CHECK(rej["rewards"] == json::array({0.0, 0.0, 0.0}));
  const auto recs = h.records();
  REQUIRE(recs.size() == 6);
  CHECK(recs[3].event_index == 1);
}

TEST_CASE("a new request auto-rejects the pending set") {
  Harness h("sugg_service_auto.jsonl");
  const auto sid = h.session();
  const auto first = h.suggest(sid, {"great"});
  const auto second = h.suggest(sid, {"great", "place"});
  CHECK(first["request_id"] != second["request_id"]);
  auto recs = h.records();
  REQUIRE(recs.size() == 3);
  for (const auto& r : recs) CHECK(r.reward == 0.0);
  CHECK(h.event(sid, first["request_id"], "accept", 0).status == 409);
  CHECK(h.event(sid, second["request_id"], "accept", 0).status == 200);
  recs = h.records();
  REQUIRE(recs.size() == 6);
  CHECK(recs[3].reward == 6.0);
  CHECK(recs[3].event_index == 1);
}

TEST_CASE("malformed suggestion requests") {
  Harness h("sugg_service_bad.jsonl");
  const auto sid = h.session();
  CHECK(h.core->suggestions("{").status == 400);
  CHECK(h.core->suggestions(R"({"context_tokens":[]})").status == 400);
  CHECK(h.core->suggestions(json{{"session_id", sid}, {"context_tokens", "the"}}.dump()).status == 400);
  CHECK(h.core->suggestions(json{{"session_id", sid}, {"context_tokens", {"two words"}}}.dump()).status == 400);
  CHECK(h.core->suggestions(json{{"session_id", sid}, {"context_tokens", {""}}}.dump()).status == 400);
  CHECK(h.core->suggestions(json{{"session_id", sid}, {"context_tokens", {1}}}.dump()).status == 400);
  CHECK(h.core->suggestions(json{{"session_id", sid}, {"mid_word", "yes"}}.dump()).status == 400);
  CHECK(h.core->suggestions(json{{"session_id", sid}, {"mid_word", true}}.dump()).status == 400);
  CHECK(h.core->suggestions(json{{"session_id", "unknown"}}.dump()).status == 404);
  CHECK(h.core->events("{}").status == 400);
  const auto empty = h.suggest(sid, {});
  CHECK(empty["suggestions"].size() == 3);
}

TEST_CASE("mid-word requests complete the partial word") {
  Harness h("sugg_service_mid.jsonl");
  const auto sid = h.session();
  const auto s = h.suggest(sid, {"the", "re"}, true);
  CHECK(s["mid_word"] == true);
  for (const auto& sug : s["suggestions"]) CHECK(sug["words"][0].get<std::string>().rfind("re", 0) == 0);
  REQUIRE(h.event(sid, s["request_id"], "reject").status == 200);
  const auto recs = h.records();
  REQUIRE(recs.size() == 3);
  for (const auto& r : recs) {
    CHECK(r.mid_word);
    CHECK(r.partial_word == "re");
    CHECK(r.context == std::vector<Token>{"<r>", "the"});
    CHECK(r.propensity == model()->policy->phrase_probability(r.context, r.words, "re"));
    CHECK(to_interaction(r).first_word_prefix == "re");
  }

  const auto none = h.suggest(sid, {"the", "qqqq"}, true);
  CHECK(none["mid_word"] == false);
  CHECK(none["suggestions"].size() == 3);
}

TEST_CASE("idle sessions expire and their pending set is rejected") {
  ServiceConfig cfg;
  cfg.session_timeout_ms = 5000;
  Harness h("sugg_service_expiry.jsonl", cfg);
  const auto idle = h.session();
  const auto busy = h.session();
  h.suggest(idle, {"the"});
  h.clock->store(4000);
  const auto s = h.suggest(busy, {"the"});
  CHECK(h.core->expire_idle() == 0);
  h.clock->store(6000);
  CHECK(h.core->expire_idle() == 1);
  CHECK(h.core->session_count() == 1);
  const auto recs = h.records();
  REQUIRE(recs.size() == 3);
  for (const auto& r : recs) {
    CHECK(r.session_id == idle);
    CHECK(r.reward == 0.0);
    CHECK(r.timestamp_ms == 6000);
  }
  CHECK(h.core->suggestions(json{{"session_id", idle}}.dump()).status == 404);
  CHECK(h.event(busy, s["request_id"], "accept", 0).status == 200);
  h.clock->store(20000);
  CHECK(h.core->expire_idle() == 1);
  CHECK(h.records().size() == 6);
}

TEST_CASE("every displayed set ends in exactly K records") {
  Harness h("sugg_service_bookkeeping.jsonl");
  const auto sid = h.session();
  Rng rng(3);
  double expected_reward = 0.0;
  std::size_t sets = 0;
  for (int i = 0; i < 200; ++i) {
    const auto s = h.suggest(sid, {"the", "staff"});
    ++sets;
    const auto u = rng.below(3);
    if (u == 0) {
      const int slot = int(rng.below(3));
      const int words = 1 + int(rng.below(6));
      REQUIRE(h.event(sid, s["request_id"], "accept", slot, words).status == 200);
      expected_reward += words;
    } else if (u == 1) {
      REQUIRE(h.event(sid, s["request_id"], "reject").status == 200);
    }
  }
  h.clock->store(h.clock->load() + h.core->config().session_timeout_ms);
  h.core->expire_idle();
  const auto recs = h.records();
  CHECK(recs.size() == 3 * sets);
  double total = 0.0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].event_index == i / 3);
    CHECK(recs[i].slot == i % 3);
    total += recs[i].reward;
  }
  CHECK(total == expected_reward);
}

TEST_CASE("policy endpoint") {
  Harness h("sugg_service_policy.jsonl");
  const auto p = json::parse(h.core->policy().body);
  CHECK(p["tag"] == model()->policy_tag);
  CHECK(p["weights"]["base_lm"] == 2.0);
  CHECK(p["weights"]["is_long"] == 0.0);
  CHECK(p["weights"].size() == kFeatureDim);
  CHECK(p["K"] == 3);
  CHECK(p["L"] == 6);
}

TEST_CASE("concurrent sessions") {
  Harness h("sugg_service_concurrent.jsonl");
  constexpr int kThreads = 4, kRounds = 50;
  std::vector<std::string> ids;
  for (int t = 0; t < kThreads; ++t) ids.push_back(h.session());
  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < kRounds; ++i) {
        const auto r = h.core->suggestions(json{{"session_id", ids[std::size_t(t)]}, {"context_tokens", {"nice"}}}.dump());
        if (r.status != 200) {
          ++failures;
          continue;
        }
        const auto rid = json::parse(r.body)["request_id"];
        if (h.core->events(json{{"session_id", ids[std::size_t(t)]}, {"request_id", rid}, {"action", "reject"}}.dump())
                .status != 200)
          ++failures;
      }
    });
  for (auto& th : threads) th.join();
  CHECK(failures == 0);
  CHECK(h.records().size() == std::size_t(3 * kThreads * kRounds));
}

TEST_CASE("HTTP front end") {
  ServiceConfig cfg;
  cfg.allowed_origin = "http://localhost:3000";
  Harness h("sugg_service_http.jsonl", cfg);
  HttpService http(h.core);
  const int port = http.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread server([&] { http.listen(); });
  http.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://localhost:3000");
  CHECK(json::parse(health->body)["status"] == "ok");

  auto pre = cli.Options("/suggestions");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

  auto missing = cli.Get("/nowhere");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"] == "not found");

  auto sess = cli.Post("/session", R"({"client_token":"http"})", "application/json");
  REQUIRE(sess);
  CHECK(sess->status == 200);
  const std::string sid = json::parse(sess->body)["session_id"];
  auto sug = cli.Post("/suggestions", json{{"session_id", sid}, {"context_tokens", {"the", "service"}}}.dump(),
                      "application/json");
  REQUIRE(sug);
  CHECK(sug->status == 200);
  CHECK(sug->get_header_value("Content-Type") == "application/json");
  const auto rid = json::parse(sug->body)["request_id"];
  auto ev = cli.Post("/events", json{{"session_id", sid}, {"request_id", rid}, {"action", "accept"}, {"slot", 0}}.dump(),
                     "application/json");
  REQUIRE(ev);
  CHECK(ev->status == 200);
  auto again = cli.Post("/events", json{{"session_id", sid}, {"request_id", rid}, {"action", "reject"}}.dump(),
                        "application/json");
  REQUIRE(again);
  CHECK(again->status == 409);
  auto pol = cli.Get("/policy");
  REQUIRE(pol);
  CHECK(json::parse(pol->body)["tag"] == model()->policy_tag);

  http.stop();
  server.join();
  CHECK(h.records().size() == 3);
}
