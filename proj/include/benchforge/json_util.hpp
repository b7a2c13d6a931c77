#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace benchforge {

// Insertion-ordered so that written records keep their field order.
using Json = nlohmann::ordered_json;

/// Parses a complete JSON document, rejecting objects with duplicated keys.
/// Throws ParseError.
Json parse_json_strict(std::string_view text);

/// Reads and strictly parses a JSON file. Throws MissingArtifactError / ParseError.
Json read_json_file(const std::filesystem::path& path);

/// Reads a JSONL file; blank lines are skipped. Errors name the line number.
std::vector<Json> read_jsonl_file(const std::filesystem::path& path);

/// Writes `doc` with 2-space indentation and a trailing newline, atomically
/// (temp file + rename).
void write_json_file(const std::filesystem::path& path, const Json& doc);

/// Writes one compact JSON document per line, atomically.
void write_jsonl_file(const std::filesystem::path& path, const std::vector<Json>& rows);

/// Appends a single compact line and flushes.
void append_jsonl_line(const std::filesystem::path& path, const Json& row);

/// Atomic whole-file text write.
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

/// Required string member; throws ValidationError naming `key` otherwise.
std::string require_string(const Json& obj, std::string_view key);

/// Optional string member; "" when absent. Throws if present but not a string.
std::string optional_string(const Json& obj, std::string_view key);

}  // namespace benchforge
