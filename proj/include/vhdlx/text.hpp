#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vhdlx::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

// Current UTC time as ISO-8601 with second precision.
std::string utc_timestamp();

// Fixed two-decimal rendering ("0.34").
std::string fixed2(double v);

} // namespace vhdlx::text
