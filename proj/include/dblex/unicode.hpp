#pragma once

#include <string>
#include <string_view>

// Thin UTF-8 helpers. Character classification and case folding go through
// ICU; decoding is done here so callers can work on code point sequences.
namespace dblex::unicode {

/// Decodes UTF-8 into Unicode scalar values. Ill-formed sequences decode to
/// U+FFFD, one replacement per offending byte.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

bool is_letter(char32_t cp);
bool is_digit(char32_t cp);
bool is_punct(char32_t cp);
bool is_space(char32_t cp);
bool is_upper(char32_t cp);

/// True for code points in the Greek, Cyrillic or Hebrew blocks.
bool is_foreign_script(char32_t cp);

/// Full Unicode case folding, used for case-insensitive comparisons.
std::string fold_case(std::string_view utf8);

/// Collapses runs of whitespace into one ASCII space and trims both ends.
std::string normalize_space(std::string_view utf8);

std::size_t length(std::string_view utf8);

}  // namespace dblex::unicode
