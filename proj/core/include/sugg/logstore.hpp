#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sugg/error.hpp"
#include "sugg/interaction.hpp"
#include "sugg/tokens.hpp"

namespace sugg {

inline constexpr int kLogSchemaVersion = 1;

/// One displayed suggestion and the reward it earned. See docs/log_schema.md.
struct LogRecord {
  int schema_version = kLogSchemaVersion;
  std::string session_id;
  std::uint64_t event_index = 0;  // non-decreasing within a session
  std::uint32_t slot = 0;         // position in the displayed set
  std::string document_id;        // source document, empty for live sessions
  std::vector<Token> context;
  std::vector<Token> words;
  std::vector<double> per_word_propensities;
  double propensity = 1.0;
  double reward = 0.0;
  std::string generator;          // policy tag
  std::int64_t timestamp_ms = 0;
  bool mid_word = false;
  std::string partial_word;       // prefix that filtered the first word

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

/// Empty when the record satisfies every field invariant, else the reason.
std::optional<std::string> validate(const LogRecord& record);

std::string to_json_line(const LogRecord& record);
/// Throws IoError on malformed input.
LogRecord from_json_line(std::string_view line);

class LogRejected : public Error {
 public:
  using Error::Error;
};

/// Append-only JSONL file with one serializing writer.
///
/// Each record is written with a single write(2) on an O_APPEND descriptor;
/// a failed or short write is truncated away before the error propagates.
class LogStore {
 public:
  struct Options {
    bool fsync_each_append = false;
  };

  explicit LogStore(std::filesystem::path path);
  LogStore(std::filesystem::path path, Options options);
  ~LogStore();
  LogStore(const LogStore&) = delete;
  LogStore& operator=(const LogStore&) = delete;

  /// Validates, then writes. Throws LogRejected or IoError. Thread-safe.
  void append(const LogRecord& record);
  void append(std::span<const LogRecord> records);

  const std::filesystem::path& path() const { return path_; }

 private:
  void write_locked(const std::string& bytes);

  std::filesystem::path path_;
  Options options_;
  int fd_ = -1;
  std::mutex mutex_;
  std::unordered_map<std::string, std::uint64_t> last_event_;
};

enum class ReadMode { strict, lenient };

struct ReadResult {
  std::vector<LogRecord> records;
  std::size_t skipped = 0;  // malformed lines ignored in lenient mode
};

/// Reads complete lines in file order; a trailing line without a newline is
/// an in-progress append and is not returned. Missing file reads as empty.
ReadResult read_log(const std::filesystem::path& path, ReadMode mode = ReadMode::strict);
void write_log(const std::filesystem::path& path, std::span<const LogRecord> records);

struct LogFilter {
  std::optional<std::string> generator;
  std::optional<std::string> session_id;
  std::optional<std::int64_t> from_ms;  // inclusive
  std::optional<std::int64_t> to_ms;    // exclusive
  bool matches(const LogRecord& r) const;
};

/// Estimation tuple for a record; the group is the source document when
/// known, else the session.
LoggedInteraction to_interaction(const LogRecord& record);

struct Dataset {
  std::vector<LoggedInteraction> interactions;
  std::size_t skipped = 0;
};

Dataset load_dataset(const std::filesystem::path& path, const LogFilter& filter = {},
                     ReadMode mode = ReadMode::strict);

}  // namespace sugg
