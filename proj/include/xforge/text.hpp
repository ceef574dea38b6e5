#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace xforge::text {

/// Number of unicode scalar values in a UTF-8 string. Invalid bytes count as
/// one scalar each so the function stays total.
std::size_t scalar_count(std::string_view utf8);

/// Decodes UTF-8 into code points; invalid sequences map to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view utf8);
std::string encode_utf8(const std::vector<char32_t>& cps);

/// Collapses internal whitespace runs to a single space and trims both ends.
std::string normalize_whitespace(std::string_view s);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Splits on ASCII whitespace, dropping empty tokens.
std::vector<std::string> split_words(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Replaces every "{name}" in tmpl with the mapped value. Unknown placeholders
/// are left untouched.
std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string, std::string>>& vars);

}  // namespace xforge::text
