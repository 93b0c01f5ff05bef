#pragma once

// Small text helpers shared by the file formats: shortest round-trip number
// formatting, strict number parsing, CSV field splitting and whole-file IO.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cropref::textio {

// Shortest representation that parses back to the same double.
std::string format_double(double v);
// Fixed notation with `decimals` digits after the point.
std::string format_fixed(double v, int decimals);

// Whole-token parses; throw Error(Parse) naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
// Whitespace-separated tokens.
std::vector<std::string_view> tokens(std::string_view s);
std::string lower(std::string_view s);

// Plain CSV (no quoting); fields must not contain commas.
std::vector<std::string> split_csv_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);
// Creates parent directories. Throws Error(Io) on failure.
void write_file(const std::filesystem::path& path, std::string_view content);

// FNV-1a 64-bit, used for config/artifact fingerprints.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace cropref::textio
