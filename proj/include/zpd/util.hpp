#pragma once

#include <string>
#include <vector>

namespace zpd {

std::string to_lower(const std::string& s);
std::string trim(const std::string& s);

// Maximal non-whitespace runs.
std::vector<std::string> whitespace_tokens(const std::string& s);

// Lowercased alphanumeric runs (retrieval tokenization).
std::vector<std::string> alnum_tokens(const std::string& s);

// Shortest round-trip decimal text for a double (std::to_chars).
std::string format_double(double x);

// Hex-encoded SHA-256 of the input bytes.
std::string sha256_hex(const std::string& data);

// Minimal CSV quoting: wraps in quotes when the field contains , " or newline.
std::string csv_field(const std::string& s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace zpd
