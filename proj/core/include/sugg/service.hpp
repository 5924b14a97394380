#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sugg/logstore.hpp"
#include "sugg/policy.hpp"

namespace sugg {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path lm_path;
  std::filesystem::path lexicon_path;
  std::filesystem::path weights_path;  // empty: reference weights at tau
  std::filesystem::path log_path = "interactions.jsonl";
  std::size_t suggestions_per_set = kSuggestionsPerSet;
  std::size_t suggestion_length = kSuggestionLength;
  double tau = kReferenceTemperature;
  std::int64_t session_timeout_ms = 30 * 60 * 1000;
  std::string allowed_origin = "*";
  std::uint64_t seed = 0;  // 0 seeds sampling from std::random_device

  /// JSON object; unknown keys are errors, missing keys keep defaults.
  /// Relative paths resolve against `base_dir`.
  static ServiceConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  static ServiceConfig load(const std::filesystem::path& path);
};

/// The immutable model bundle a service instance serves from.
struct ServiceModel {
  NgramModel lm;
  std::shared_ptr<const FeatureTable> features;
  std::unique_ptr<LogLinearPolicy> policy;
  std::string policy_tag;  // hash of the weights file, or of the weights
};

std::shared_ptr<const ServiceModel> load_service_model(const ServiceConfig& config);
std::shared_ptr<const ServiceModel> make_service_model(NgramModel lm,
                                                       std::shared_ptr<const FeatureTable> features,
                                                       PolicyWeights weights, std::string tag);

/// 122 random bits from std::random_device in UUIDv4 layout.
std::string new_session_id();

/// Joins tokens for display: no space before punctuation, markers dropped.
std::string display_text(std::span<const Token> words);

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Transport-independent request handling for the suggestion service.
///
/// Every displayed set ends in exactly one group of K log records: an
/// accept or reject event, a newer /suggestions call on the same session,
/// or expiry after the idle timeout. Thread-safe.
class ServiceCore {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds

  ServiceCore(ServiceConfig config, std::shared_ptr<LogStore> log, Clock clock = {});

  void set_model(std::shared_ptr<const ServiceModel> model);
  bool ready() const;

  ApiResponse create_session(std::string_view body);
  ApiResponse suggestions(std::string_view body);
  ApiResponse events(std::string_view body);
  ApiResponse health() const;
  ApiResponse policy() const;

  /// Auto-rejects pending sets of sessions idle past the timeout and drops
  /// those sessions. Returns the number of sessions expired.
  std::size_t expire_idle();

  std::size_t session_count() const;
  std::size_t pending_count() const;
  const ServiceConfig& config() const { return config_; }

 private:
  struct Pending {
    std::string request_id;
    SuggestionSet set;
    bool mid_word = false;
  };
  struct Session {
    std::string id;
    std::string policy_tag;
    std::vector<Token> context;
    std::optional<Pending> pending;
    std::uint64_t next_event = 0;
    std::int64_t last_active_ms = 0;
  };

  std::vector<LogRecord> close_pending(Session& s, int accepted_slot, std::size_t words_accepted);
  std::int64_t now() const;

  ServiceConfig config_;
  std::shared_ptr<LogStore> log_;
  Clock clock_;
  std::shared_ptr<const ServiceModel> model_;
  Rng rng_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, Session> sessions_;
  std::unordered_map<std::string, std::string> client_tokens_;
  std::unordered_map<std::string, std::string> request_owner_;  // pending request -> session
  std::unordered_set<std::string> closed_requests_;
  std::uint64_t request_counter_ = 0;
};

/// HTTP front end over ServiceCore with CORS and a background expiry sweep.
class HttpService {
 public:
  explicit HttpService(std::shared_ptr<ServiceCore> core);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// Blocks until listen() is accepting connections.
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sugg
