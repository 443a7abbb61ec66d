#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace reflect::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Replaces CRLF and lone CR with LF.
std::string normalize_newlines(std::string_view s);

// Collapses every run of whitespace (including newlines) into a single space and trims.
std::string collapse_whitespace(std::string_view s);

bool is_valid_utf8(std::string_view s);

std::vector<std::string_view> split_lines(std::string_view s);

// Glob match supporting `*` (any run) and `?` (one byte).
bool glob_match(std::string_view pattern, std::string_view subject);

}  // namespace reflect::text
