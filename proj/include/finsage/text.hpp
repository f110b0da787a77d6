#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace finsage {

/// Lowercased word tokens. Splits on ASCII whitespace and punctuation; bytes
/// >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

/// Term-frequency map over tokenize(text).
std::map<std::string, int> term_frequencies(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);

/// Sentences end at '.', '?', '!' or ';' followed by whitespace. The
/// terminator stays with its sentence; surrounding whitespace is trimmed.
std::vector<std::string> split_sentences(std::string_view text);

std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

std::string sha256_hex(std::string_view data);

enum class LengthUnit { kCharacters, kTokens };

std::size_t measure_length(std::string_view text, LengthUnit unit);
std::optional<LengthUnit> parse_length_unit(std::string_view name);
const char* length_unit_name(LengthUnit unit);

/// Calendar date with ISO-8601 (YYYY-MM-DD) text form.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}
  Date(int year, unsigned month, unsigned day);

  static std::optional<Date> parse(std::string_view iso);
  static Date today();

  std::string to_string() const;
  std::chrono::sys_days days() const { return days_; }

  /// Signed day count from `earlier` to this date.
  long days_since(const Date& earlier) const {
    return static_cast<long>((days_ - earlier.days_).count());
  }

  friend auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

}  // namespace finsage
