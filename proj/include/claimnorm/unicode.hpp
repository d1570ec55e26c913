#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers over ICU character properties.
namespace claimnorm::unicode {

struct CodePoint {
  char32_t value;
  std::size_t offset;  // byte offset into the source string
  std::size_t length;  // encoded length in bytes
};

// Decodes `text`; malformed sequences decode to U+FFFD with length 1.
std::vector<CodePoint> code_points(std::string_view text);

// Byte offset of the first malformed sequence, if any.
std::optional<std::size_t> first_invalid_utf8(std::string_view text);

void append_utf8(std::string& out, char32_t cp);

// Full Unicode lowercase mapping with root-locale rules.
std::string to_lower(std::string_view text);

bool is_whitespace(char32_t cp);             // White_Space
bool is_punctuation(char32_t cp);            // General_Category P*
bool is_word_char(char32_t cp);              // UTS #18 \w
bool is_extended_pictographic(char32_t cp);  // Extended_Pictographic
char32_t simple_fold(char32_t cp);           // simple case folding

std::string trim(std::string_view text);
bool is_blank(std::string_view text);

// Replaces every run of whitespace with a single ASCII space and trims.
std::string collapse_whitespace(std::string_view text);

}  // namespace claimnorm::unicode
