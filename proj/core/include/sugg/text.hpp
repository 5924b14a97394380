#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace sugg::text {

/// Decodes UTF-8 code points; malformed bytes decode as U+FFFD one byte at a time.
class Utf8Cursor {
 public:
  explicit Utf8Cursor(std::string_view s) : s_(s) {}
  bool done() const { return pos_ >= s_.size(); }
  std::size_t position() const { return pos_; }
  /// Returns the next code point and advances past it.
  char32_t next();

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

bool is_valid_utf8(std::string_view s);

/// Alphabetic test covering ASCII, Latin, Greek, Cyrillic, Armenian, Hebrew,
/// Arabic, Thai, kana, CJK ideographs and Hangul syllables.
bool is_letter(char32_t c);
bool is_digit(char32_t c);
bool is_space(char32_t c);

/// Number of alphabetic code points; punctuation, digits and marks do not count.
std::size_t letter_count(std::string_view utf8);

/// Lowercases ASCII and the Latin-1 / Latin Extended-A uppercase letters.
std::string to_lower(std::string_view utf8);

void append_utf8(std::string& out, char32_t c);

}  // namespace sugg::text
