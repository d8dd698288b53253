#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace fisco::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Whitespace-token count. Used by the length filter, so the definition must
/// stay aligned with `split_whitespace`.
std::size_t word_count(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

/// Splits prose into sentences at '.', '!' or '?' followed by whitespace and an
/// uppercase letter, digit or quote. Common abbreviations ("Dr.", "e.g.") and
/// initialisms ("B.S.") do not end a sentence. Results are trimmed, non-empty.
std::vector<std::string> split_sentences(std::string_view s);

/// Lowercased tokens with ASCII punctuation stripped from both ends and
/// interior punctuation (other than apostrophes and hyphens) removed. Bytes
/// >= 0x80 are kept as-is so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view s);

/// Replaces every occurrence of `from` (non-empty) with `to`.
std::string replace_all(std::string_view s, std::string_view from, std::string_view to);

bool contains_icase(std::string_view haystack, std::string_view needle);

}  // namespace fisco::text
