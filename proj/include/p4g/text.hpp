#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace p4g {

// Splits on '.', '!' or '?' followed by whitespace. The terminator stays
// with its sentence; runs of terminators ("?!") are kept together.
std::vector<std::string> segment(std::string_view text);

// Lowercases, separates ASCII punctuation into single-character tokens and
// splits on whitespace. Apostrophes inside a word are kept ("don't").
std::vector<std::string> tokenize(std::string_view text);

// True when the token contains at least one letter or digit.
bool is_word(std::string_view token);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 14695981039346656037ULL);
std::string hex64(uint64_t v);

}  // namespace p4g
