#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace re2gec {

class Utf8Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All character offsets in this library count Unicode scalar values.
// Throws Utf8Error on malformed input (overlongs, surrogates, truncation).
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);
std::string encode_utf8(char32_t cp);

bool is_valid_utf8(std::string_view text);

// Number of scalar values in a valid UTF-8 string.
std::size_t char_length(std::string_view text);

bool is_unicode_space(char32_t cp);

std::string trim(std::string_view text);

}  // namespace re2gec
