#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace reflect::io {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Parses one JSON object per non-blank line. Throws ParseError with the line number.
std::vector<json> parse_jsonl(std::string_view contents);
std::vector<json> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<json>& rows);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

// Appends a single line and flushes; used for append-only logs.
void append_jsonl(const std::filesystem::path& path, const json& row);

}  // namespace reflect::io
