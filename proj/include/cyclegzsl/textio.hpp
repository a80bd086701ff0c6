#pragma once

// Plain-text matrix files: one comma-separated row per line, decimals with 17
// significant digits so every double survives a write/read cycle.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cyclegzsl/matrix.hpp"

namespace cyclegzsl {

std::string format_double(double v);

std::string read_text_file(const std::filesystem::path &path);
/// Writes through a temporary sibling and renames it into place.
void write_text_file(const std::filesystem::path &path, std::string_view contents);

std::string matrix_to_csv(const Matrix &m);
/// `cols` is required so an empty file still yields a 0×cols matrix.
Matrix matrix_from_csv(std::string_view text, std::size_t cols, std::string_view what);

std::string labels_to_csv(const std::vector<std::size_t> &labels);
std::vector<std::size_t> labels_from_csv(std::string_view text, std::string_view what);

} // namespace cyclegzsl
