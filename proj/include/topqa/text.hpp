#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace topqa::text {

// Trims leading/trailing whitespace and collapses internal runs to one space.
std::string collapse_whitespace(std::string_view s);

std::string to_lower(std::string_view s);

// Whitespace-delimited word count.
int word_count(std::string_view s);

std::vector<std::string> split_words(std::string_view s);

// Splits on an exact delimiter string; no trimming of pieces.
std::vector<std::string> split(std::string_view s, std::string_view delim);

std::string join(const std::vector<std::string>& items, std::string_view sep);

// English list join: "a", "a or b", "a, b, or c" (conj = "or"/"and").
std::string natural_join(const std::vector<std::string>& items, std::string_view conj);

bool replace_first(std::string& s, std::string_view from, std::string_view to);

int count_occurrences(std::string_view s, std::string_view needle);

}  // namespace topqa::text
