#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hazardtm::text {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

/// Letter test covering Latin, Greek and Cyrillic blocks, which is what
/// German news text needs. Digits and punctuation are not letters.
bool is_letter(char32_t c);
bool is_digit(char32_t c);
bool is_space(char32_t c);
char32_t to_lower(char32_t c);

std::string to_lower(std::string_view s);
std::size_t length(std::string_view s);  // in code points
bool is_alphabetic(std::string_view s);  // non-empty and letters only

struct TokenSpan {
    std::string surface;
    std::size_t begin = 0;  // byte offsets into the source text
    std::size_t end = 0;
};

/// Whitespace + punctuation tokenizer: a token is a maximal run of letters
/// and digits. Everything else separates tokens and is dropped.
std::vector<TokenSpan> tokenize_spans(std::string_view s);
std::vector<std::string> tokenize(std::string_view s);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace hazardtm::text
