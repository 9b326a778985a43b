#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lassolens {

/// Lowercase hex SHA-256 of the input.
std::string sha256_hex(std::string_view bytes);

/// First 16 hex digits of the SHA-256; used for every content-derived id.
std::string content_id(std::string_view bytes);

/// Shortest decimal text that parses back to exactly the same double.
std::string shortest_repr(double value);

/// Rounded display form used in prompts and explanations: integers print
/// without decimals, magnitudes >= 100 get two decimals, smaller values four
/// significant digits.
std::string display_number(double value);

/// Parses a whole token as a finite double (surrounding whitespace allowed).
std::optional<double> parse_finite(std::string_view text);

std::string_view trim(std::string_view text);
std::string to_lower(std::string_view text);

/// "" and "NA" (any case) after trimming.
bool is_missing_token(std::string_view text);

/// Number of UTF-8 code points; continuation bytes are not counted.
std::size_t utf8_length(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace lassolens
