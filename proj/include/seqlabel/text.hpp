#ifndef SEQLABEL_TEXT_HPP
#define SEQLABEL_TEXT_HPP

// String helpers shared by the parsers and serializers.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seqlabel::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
/// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_ws(std::string_view s);
std::vector<std::string_view> lines(std::string_view s);
std::string to_lower(std::string_view s);

/// Shortest representation that parses back to the same double.
std::string format_double(double value);
/// Whole-token parse; nullopt on any trailing junk.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace seqlabel::text

#endif  // SEQLABEL_TEXT_HPP
