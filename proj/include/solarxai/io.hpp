#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace solarxai::io {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict float parse: the whole field must be consumed and the result finite.
std::optional<double> parse_double(std::string_view text);
std::optional<long> parse_int(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

/// Writes via a temporary sibling and renames, so readers never see partial
/// files. Throws DataError when the path is not writable.
void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

} // namespace solarxai::io
