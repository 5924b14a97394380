#include "sugg/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <json.hpp>
#include <random>
#include <thread>

#include "sugg/error.hpp"
#include "sugg/text.hpp"
#include "sugg/util.hpp"

namespace sugg {
namespace {

using nlohmann::json;

ApiResponse reply(int status, const json& body) { return {status, body.dump()}; }

ApiResponse error_reply(int status, std::string_view message) {
  return reply(status, json{{"error", message}});
}

std::int64_t wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (std::uint64_t(rd()) << 32) ^ rd();
}

std::optional<json> parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::optional<std::string> get_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

bool is_punct_token(std::string_view t) {
  text::Utf8Cursor cur(t);
  if (cur.done()) return false;
  const char32_t c = cur.next();
  return !text::is_letter(c) && !text::is_digit(c);
}

bool valid_token(std::string_view t) {
  if (t.empty() || !text::is_valid_utf8(t)) return false;
  text::Utf8Cursor cur(t);
  while (!cur.done())
    if (text::is_space(cur.next())) return false;
  return true;
}

}  // namespace

ServiceConfig ServiceConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("service config is not a JSON object", 1);
  ServiceConfig c;
  const auto path_of = [&](const json& v) {
    std::filesystem::path p = v.get<std::string>();
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "host") c.host = v.get<std::string>();
      else if (key == "port") c.port = v.get<int>();
      else if (key == "lm") c.lm_path = path_of(v);
      else if (key == "lexicon") c.lexicon_path = path_of(v);
      else if (key == "weights") c.weights_path = path_of(v);
      else if (key == "log") c.log_path = path_of(v);
      else if (key == "K") c.suggestions_per_set = v.get<std::size_t>();
      else if (key == "L") c.suggestion_length = v.get<std::size_t>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "session_timeout_s") c.session_timeout_ms = std::int64_t(v.get<double>() * 1000.0);
      else if (key == "allowed_origin") c.allowed_origin = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw InvalidArgument("unknown service config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad service config value: ") + e.what());
  }
  if (c.port < 0 || c.port > 65535) throw InvalidArgument("port out of range");
  if (c.suggestions_per_set < 1 || c.suggestion_length < 1)
    throw InvalidArgument("K and L must be at least 1");
  if (!(c.tau > 0.0)) throw InvalidArgument("temperature must be positive");
  if (c.session_timeout_ms <= 0) throw InvalidArgument("session timeout must be positive");
  return c;
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  return from_json(read_file(path), path.parent_path());
}

std::shared_ptr<const ServiceModel> make_service_model(NgramModel lm,
                                                       std::shared_ptr<const FeatureTable> features,
                                                       PolicyWeights weights, std::string tag) {
  auto m = std::make_shared<ServiceModel>();
  m->lm = std::move(lm);
  m->features = std::move(features);
  m->policy = std::make_unique<LogLinearPolicy>(m->lm, m->features, weights, "live");
  m->policy_tag = std::move(tag);
  return m;
}

std::shared_ptr<const ServiceModel> load_service_model(const ServiceConfig& config) {
  auto lm = NgramModel::load(config.lm_path);
  const auto lex = PosLexicon::load(config.lexicon_path);
  auto features = std::make_shared<const FeatureTable>(lm.vocab(), lex);
  PolicyWeights w = PolicyWeights::reference(config.tau);
  std::string tag = "reference:" + w.hash();
  if (!config.weights_path.empty()) {
    w = PolicyWeights::load(config.weights_path);
    tag = "weights:" + file_hash(config.weights_path);
  }
  return make_service_model(std::move(lm), std::move(features), w, std::move(tag));
}

std::string new_session_id() {
  std::random_device rd;
  std::uint8_t b[16];
  for (int i = 0; i < 16; i += 4) {
    const std::uint32_t x = rd();
    for (int k = 0; k < 4; ++k) b[i + k] = std::uint8_t(x >> (8 * k));
  }
  b[6] = std::uint8_t((b[6] & 0x0f) | 0x40);
  b[8] = std::uint8_t((b[8] & 0x3f) | 0x80);
  char out[37];
  std::snprintf(out, sizeof out,
                "%02x%02x%02x%02x-%02x%02x-%02x%02x-%02x%02x-%02x%02x%02x%02x%02x%02x", b[0], b[1],
                b[2], b[3], b[4], b[5], b[6], b[7], b[8], b[9], b[10], b[11], b[12], b[13], b[14],
                b[15]);
  return out;
}

std::string display_text(std::span<const Token> words) {
  std::string out;
  for (const auto& w : words) {
    if (is_marker(w)) continue;
    if (!out.empty() && !is_punct_token(w)) out += ' ';
    out += w;
  }
  return out;
}

ServiceCore::ServiceCore(ServiceConfig config, std::shared_ptr<LogStore> log, Clock clock)
    : config_(std::move(config)),
      log_(std::move(log)),
      clock_(clock ? std::move(clock) : Clock(wall_clock_ms)),
      rng_(config_.seed != 0 ? config_.seed : random_seed()) {}

void ServiceCore::set_model(std::shared_ptr<const ServiceModel> model) {
  std::lock_guard lock(mutex_);
  model_ = std::move(model);
}

bool ServiceCore::ready() const {
  std::lock_guard lock(mutex_);
  return model_ != nullptr;
}

std::int64_t ServiceCore::now() const { return clock_(); }

ApiResponse ServiceCore::create_session(std::string_view body) {
  const auto req = parse_body(body);
  if (!req) return error_reply(400, "request body must be a JSON object");
  std::lock_guard lock(mutex_);
  if (!model_) return error_reply(503, "model not loaded");
  const auto token = get_string(*req, "client_token");
  if (token) {
    auto it = client_tokens_.find(*token);
    if (it != client_tokens_.end() && sessions_.count(it->second)) {
      sessions_[it->second].last_active_ms = now();
      return reply(200, {{"session_id", it->second}, {"policy", model_->policy_tag}});
    }
  }
  Session s;
  s.id = new_session_id();
  s.policy_tag = model_->policy_tag;
  s.last_active_ms = now();
  const std::string id = s.id;
  sessions_.emplace(id, std::move(s));
  if (token) client_tokens_[*token] = id;
  return reply(200, {{"session_id", id}, {"policy", model_->policy_tag}});
}

std::vector<LogRecord> ServiceCore::close_pending(Session& s, int accepted_slot,
                                                  std::size_t words_accepted) {
  std::vector<LogRecord> out;
  if (!s.pending) return out;
  const Pending& p = *s.pending;
  const std::uint64_t event = s.next_event++;
  const std::int64_t ts = now();
  for (std::size_t j = 0; j < p.set.suggestions.size(); ++j) {
    const auto& sug = p.set.suggestions[j];
    LogRecord r;
    r.session_id = s.id;
    r.event_index = event;
    r.slot = std::uint32_t(j);
    r.context = p.set.context;
    r.words = sug.words;
    r.per_word_propensities = sug.per_word_probs;
    r.propensity = sug.propensity;
    r.reward = int(j) == accepted_slot ? double(words_accepted) : 0.0;
    r.generator = s.policy_tag;
    r.timestamp_ms = ts;
    r.mid_word = p.mid_word;
    r.partial_word = p.mid_word ? p.set.first_word_prefix : std::string();
    out.push_back(std::move(r));
  }
  request_owner_.erase(p.request_id);
  closed_requests_.insert(p.request_id);
  s.pending.reset();
  if (log_) log_->append(std::span<const LogRecord>(out));
  return out;
}

ApiResponse ServiceCore::suggestions(std::string_view body) {
  const auto req = parse_body(body);
  if (!req) return error_reply(400, "request body must be a JSON object");
  const auto sid = get_string(*req, "session_id");
  if (!sid) return error_reply(400, "session_id is required");

  std::vector<Token> context{Token(kBor)};
  auto ct = req->find("context_tokens");
  if (ct != req->end()) {
    if (!ct->is_array()) return error_reply(400, "context_tokens must be an array of strings");
    for (const auto& t : *ct) {
      if (!t.is_string() || !valid_token(t.get<std::string>()))
        return error_reply(400, "context_tokens must be non-empty UTF-8 strings without whitespace");
      auto tok = text::to_lower(t.get<std::string>());
      if (tok == kBor && context.size() == 1) continue;
      context.push_back(std::move(tok));
    }
  }
  bool mid_word = false;
  auto mw = req->find("mid_word");
  if (mw != req->end()) {
    if (!mw->is_boolean()) return error_reply(400, "mid_word must be a boolean");
    mid_word = mw->get<bool>();
  }
  std::string prefix;
  if (mid_word) {
    if (context.size() < 2) return error_reply(400, "mid_word requires a partial last token");
    prefix = context.back();
    context.pop_back();
  }

  std::lock_guard lock(mutex_);
  if (!model_) return error_reply(503, "model not loaded");
  auto it = sessions_.find(*sid);
  if (it == sessions_.end()) return error_reply(404, "unknown session");
  Session& s = it->second;
  s.last_active_ms = now();
  close_pending(s, -1, 0);

  const auto& policy = *model_->policy;
  const std::size_t k = config_.suggestions_per_set;
  if (!prefix.empty()) {
    const auto mask = prefix_mask(policy.lm().vocab(), prefix);
    const auto n = std::size_t(std::count(mask.begin(), mask.end(), std::uint8_t(1)));
    // Too few completions to fill distinct slots: suggest unfiltered.
    if (n < k) {
      prefix.clear();
      mid_word = false;
    }
  }
  Pending p;
  try {
    p.set = policy.generate_suggestion_set(context, k, config_.suggestion_length, rng_, prefix);
  } catch (const Error& e) {
    return error_reply(422, e.what());
  }
  p.mid_word = mid_word;
  p.request_id = s.id.substr(0, 8) + "-" + std::to_string(++request_counter_);
  s.context = context;

  json sugs = json::array();
  for (std::size_t j = 0; j < p.set.suggestions.size(); ++j) {
    const auto& w = p.set.suggestions[j].words;
    sugs.push_back({{"slot", j}, {"words", w}, {"display_text", display_text(w)}});
  }
  json out{{"request_id", p.request_id}, {"suggestions", sugs}, {"mid_word", mid_word}};
  request_owner_[p.request_id] = s.id;
  s.pending = std::move(p);
  return reply(200, out);
}

ApiResponse ServiceCore::events(std::string_view body) {
  const auto req = parse_body(body);
  if (!req) return error_reply(400, "request body must be a JSON object");
  const auto sid = get_string(*req, "session_id");
  const auto rid = get_string(*req, "request_id");
  const auto action = get_string(*req, "action");
  if (!sid || !rid || !action) return error_reply(400, "session_id, request_id and action are required");
  if (*action != "accept" && *action != "reject")
    return error_reply(400, "action must be accept or reject");

  std::lock_guard lock(mutex_);
  auto it = sessions_.find(*sid);
  if (it == sessions_.end()) return error_reply(404, "unknown session");
  Session& s = it->second;
  s.last_active_ms = now();
  if (!s.pending || s.pending->request_id != *rid) {
    if (closed_requests_.count(*rid)) return error_reply(409, "request already reported");
    return error_reply(404, "unknown request_id");
  }

  int slot = -1;
  std::size_t words = 0;
  if (*action == "accept") {
    auto sl = req->find("slot");
    if (sl == req->end() || !sl->is_number_integer()) return error_reply(400, "accept requires an integer slot");
    const auto v = sl->get<std::int64_t>();
    if (v < 0 || v >= std::int64_t(s.pending->set.suggestions.size()))
      return error_reply(400, "slot out of range");
    slot = int(v);
    const std::size_t len = s.pending->set.suggestions[std::size_t(slot)].words.size();
    words = len;
    auto wa = req->find("words_accepted");
    if (wa != req->end()) {
      if (!wa->is_number_integer()) return error_reply(400, "words_accepted must be an integer");
      const auto n = wa->get<std::int64_t>();
      if (n < 1 || n > std::int64_t(len)) return error_reply(400, "words_accepted out of range");
      words = std::size_t(n);
    }
  }
  const auto records = close_pending(s, slot, words);
  json rewards = json::array();
  for (const auto& r : records) rewards.push_back(r.reward);
  return reply(200, {{"ok", true}, {"records", records.size()}, {"rewards", rewards}});
}

ApiResponse ServiceCore::health() const {
  std::lock_guard lock(mutex_);
  std::size_t pending = 0;
  for (const auto& [id, s] : sessions_) pending += s.pending ? 1 : 0;
  return reply(model_ ? 200 : 503, {{"status", model_ ? "ok" : "loading"},
                                    {"sessions", sessions_.size()},
                                    {"pending", pending}});
}

ApiResponse ServiceCore::policy() const {
  std::lock_guard lock(mutex_);
  if (!model_) return error_reply(503, "model not loaded");
  json weights = json::object();
  const auto& th = model_->policy->weights().theta;
  for (std::size_t i = 0; i < th.size(); ++i) weights[std::string(feature_name(i))] = th[i];
  return reply(200, {{"tag", model_->policy_tag},
                     {"weights", weights},
                     {"K", config_.suggestions_per_set},
                     {"L", config_.suggestion_length}});
}

std::size_t ServiceCore::expire_idle() {
  std::lock_guard lock(mutex_);
  const std::int64_t t = now();
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (t - it->second.last_active_ms >= config_.session_timeout_ms) {
      close_pending(it->second, -1, 0);
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  if (n > 0)
    std::erase_if(client_tokens_, [&](const auto& kv) { return !sessions_.count(kv.second); });
  return n;
}

std::size_t ServiceCore::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t ServiceCore::pending_count() const {
  std::lock_guard lock(mutex_);
  return request_owner_.size();
}

struct HttpService::Impl {
  std::shared_ptr<ServiceCore> core;
  httplib::Server server;
  std::thread sweeper;
  std::mutex m;
  std::condition_variable cv;
  bool stopping = false;
};

HttpService::HttpService(std::shared_ptr<ServiceCore> core) : impl_(std::make_unique<Impl>()) {
  impl_->core = std::move(core);
  auto& svr = impl_->server;
  auto* core_ptr = impl_->core.get();
  const std::string origin = core_ptr->config().allowed_origin;
  svr.set_default_headers({{"Access-Control-Allow-Origin", origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  const auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  const auto guarded = [send](auto fn) {
    return [send, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        send(res, fn(req));
      } catch (const std::exception& e) {
        send(res, error_reply(500, e.what()));
      }
    };
  };
  svr.Post("/session", guarded([core_ptr](const httplib::Request& q) { return core_ptr->create_session(q.body); }));
  svr.Post("/suggestions", guarded([core_ptr](const httplib::Request& q) { return core_ptr->suggestions(q.body); }));
  svr.Post("/events", guarded([core_ptr](const httplib::Request& q) { return core_ptr->events(q.body); }));
  svr.Get("/health", guarded([core_ptr](const httplib::Request&) { return core_ptr->health(); }));
  svr.Get("/policy", guarded([core_ptr](const httplib::Request&) { return core_ptr->policy(); }));
  svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty())
      res.set_content(json{{"error", res.status == 404 ? "not found" : "request failed"}}.dump(),
                      "application/json");
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpService::listen() {
  auto* impl = impl_.get();
  const auto timeout = impl->core->config().session_timeout_ms;
  const auto period = std::chrono::milliseconds(std::clamp<std::int64_t>(timeout / 10, 10, 60'000));
  {
    std::lock_guard guard(impl->m);
    if (impl->stopping) return;
    impl->sweeper = std::thread([impl, period] {
      std::unique_lock lock(impl->m);
      while (!impl->cv.wait_for(lock, period, [impl] { return impl->stopping; })) {
        lock.unlock();
        impl->core->expire_idle();
        lock.lock();
      }
    });
  }
  impl->server.listen_after_bind();
}

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

void HttpService::stop() {
  {
    std::lock_guard lock(impl_->m);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  impl_->server.stop();
  if (impl_->sweeper.joinable()) impl_->sweeper.join();
}

}  // namespace sugg
