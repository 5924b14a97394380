#include "sugg/logstore.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <json.hpp>

#include "sugg/util.hpp"

namespace sugg {

using nlohmann::json;

std::optional<std::string> validate(const LogRecord& r) {
  if (r.schema_version != kLogSchemaVersion) return "unsupported schema_version";
  if (r.session_id.empty()) return "session_id is empty";
  if (r.words.empty()) return "suggestion has no words";
  if (r.per_word_propensities.size() != r.words.size())
    return "per_word_propensities and words differ in length";
  for (const auto& w : r.words)
    if (w.empty()) return "empty suggested word";
  for (const auto& t : r.context)
    if (t.empty()) return "empty context token";
  double product = 1.0;
  for (double p : r.per_word_propensities) {
    if (!(p > 0.0 && p <= 1.0)) return "per-word propensity outside (0, 1]";
    product *= p;
  }
  if (!(r.propensity > 0.0 && r.propensity <= 1.0)) return "propensity outside (0, 1]";
  if (std::abs(r.propensity - product) > 1e-12 * r.propensity)
    return "propensity is not the product of per-word propensities";
  if (!(std::isfinite(r.reward) && r.reward >= 0.0)) return "reward must be finite and >= 0";
  if (r.mid_word && r.partial_word.empty()) return "mid_word record without partial_word";
  return std::nullopt;
}

std::string to_json_line(const LogRecord& r) {
  json j = {
      {"schema_version", r.schema_version},
      {"session_id", r.session_id},
      {"event_index", r.event_index},
      {"slot", r.slot},
      {"document_id", r.document_id},
      {"context", r.context},
      {"words", r.words},
      {"per_word_propensities", r.per_word_propensities},
      {"propensity", r.propensity},
      {"reward", r.reward},
      {"generator", r.generator},
      {"timestamp_ms", r.timestamp_ms},
      {"mid_word", r.mid_word},
      {"partial_word", r.partial_word},
  };
  return j.dump();
}

LogRecord from_json_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    LogRecord r;
    r.schema_version = j.at("schema_version").get<int>();
    r.session_id = j.at("session_id").get<std::string>();
    r.event_index = j.at("event_index").get<std::uint64_t>();
    r.slot = j.at("slot").get<std::uint32_t>();
    r.document_id = j.value("document_id", "");
    r.context = j.at("context").get<std::vector<Token>>();
    r.words = j.at("words").get<std::vector<Token>>();
    r.per_word_propensities = j.at("per_word_propensities").get<std::vector<double>>();
    r.propensity = j.at("propensity").get<double>();
    r.reward = j.at("reward").get<double>();
    r.generator = j.value("generator", "");
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    r.mid_word = j.value("mid_word", false);
    r.partial_word = j.value("partial_word", "");
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed log record: ") + e.what());
  }
}

LogStore::LogStore(std::filesystem::path path) : LogStore(std::move(path), Options{}) {}

LogStore::LogStore(std::filesystem::path path, Options options)
    : path_(std::move(path)), options_(options) {
  for (const auto& r : read_log(path_, ReadMode::lenient).records) {
    auto& last = last_event_[r.session_id];
    last = std::max(last, r.event_index);
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open log " + path_.string() + ": " + std::strerror(errno));
}

LogStore::~LogStore() {
  if (fd_ >= 0) ::close(fd_);
}

void LogStore::write_locked(const std::string& bytes) {
  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw IoError("cannot stat log: " + std::string(std::strerror(errno)));
  const ssize_t n = ::write(fd_, bytes.data(), bytes.size());
  if (n != static_cast<ssize_t>(bytes.size())) {
    const int err = errno;
    if (::ftruncate(fd_, st.st_size) != 0) {
      // Nothing more can be done; the reader ignores an unterminated tail.
    }
    throw IoError("log write failed: " + std::string(n < 0 ? std::strerror(err) : "short write"));
  }
  if (options_.fsync_each_append && ::fsync(fd_) != 0)
    throw IoError("fsync failed: " + std::string(std::strerror(errno)));
}

void LogStore::append(const LogRecord& record) { append(std::span<const LogRecord>(&record, 1)); }

void LogStore::append(std::span<const LogRecord> records) {
  std::string bytes;
  for (const auto& r : records) {
    if (auto why = validate(r)) throw LogRejected("log record rejected: " + *why);
    bytes += to_json_line(r);
    bytes += '\n';
  }
  std::lock_guard lock(mutex_);
  std::unordered_map<std::string, std::uint64_t> pending;
  for (const auto& r : records) {
    auto it = pending.find(r.session_id);
    std::uint64_t last = 0;
    if (it != pending.end()) {
      last = it->second;
    } else if (auto prev = last_event_.find(r.session_id); prev != last_event_.end()) {
      last = prev->second;
    }
    if (r.event_index < last)
      throw LogRejected("event_index decreases within session " + r.session_id);
    pending[r.session_id] = r.event_index;
  }
  write_locked(bytes);
  for (const auto& [s, e] : pending) last_event_[s] = e;
}

ReadResult read_log(const std::filesystem::path& path, ReadMode mode) {
  ReadResult out;
  if (!std::filesystem::exists(path)) return out;
  const std::string data = read_file(path);
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < data.size()) {
    const auto nl = data.find('\n', start);
    if (nl == std::string::npos) break;  // unterminated tail: append in progress
    ++line_no;
    const std::string_view line(data.data() + start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    std::string problem;
    try {
      LogRecord r = from_json_line(line);
      if (auto why = validate(r)) {
        problem = "invalid log record: " + *why;
      } else {
        out.records.push_back(std::move(r));
        continue;
      }
    } catch (const IoError& e) {
      problem = e.what();
    }
    if (mode == ReadMode::strict) throw ParseError(problem, line_no);
    ++out.skipped;
  }
  return out;
}

void write_log(const std::filesystem::path& path, std::span<const LogRecord> records) {
  std::string bytes;
  for (const auto& r : records) {
    if (auto why = validate(r)) throw LogRejected("log record rejected: " + *why);
    bytes += to_json_line(r);
    bytes += '\n';
  }
  write_file(path, bytes);
}

bool LogFilter::matches(const LogRecord& r) const {
  if (generator && r.generator != *generator) return false;
  if (session_id && r.session_id != *session_id) return false;
  if (from_ms && r.timestamp_ms < *from_ms) return false;
  if (to_ms && r.timestamp_ms >= *to_ms) return false;
  return true;
}

LoggedInteraction to_interaction(const LogRecord& r) {
  LoggedInteraction x;
  x.context = r.context;
  x.action = r.words;
  x.reward = r.reward;
  x.propensity = r.propensity;
  x.group = r.document_id.empty() ? r.session_id : r.document_id;
  x.first_word_prefix = r.mid_word ? r.partial_word : std::string();
  return x;
}

Dataset load_dataset(const std::filesystem::path& path, const LogFilter& filter, ReadMode mode) {
  auto read = read_log(path, mode);
  Dataset d;
  d.skipped = read.skipped;
  for (const auto& r : read.records)
    if (filter.matches(r)) d.interactions.push_back(to_interaction(r));
  return d;
}

}  // namespace sugg
