#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fisco::io {

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, creating parent dirs.
void write_file(const std::filesystem::path& path, const std::string& content);

/// One object per non-blank line. Throws IoError with the line number on bad JSON.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

/// Rounds to 6 decimals so the shortest round-trip rendering has at most 6.
double round6(double v);

}  // namespace fisco::io
