#include "cyclegzsl/textio.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cyclegzsl/errors.hpp"

namespace cyclegzsl {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

[[noreturn]] void bad_value(std::string_view what, std::size_t line, std::string_view token) {
  throw ValidationError(std::string(what) + " line " + std::to_string(line + 1) +
                        ": cannot parse '" + std::string(token) + "'");
}

} // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return s.str();
}

void write_text_file(const std::filesystem::path &path, std::string_view contents) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string matrix_to_csv(const Matrix &m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

Matrix matrix_from_csv(std::string_view text, std::size_t cols, std::string_view what) {
  const auto lines = split_lines(text);
  Matrix m(lines.size(), cols);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    std::size_t c = 0, start = 0;
    const std::string_view line = lines[r];
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string_view::npos) end = line.size();
      const std::string token(line.substr(start, end - start));
      if (c >= cols)
        throw ValidationError(std::string(what) + " line " + std::to_string(r + 1) +
                              ": more than " + std::to_string(cols) + " columns");
      // strtod accepts "nan" and "inf", which validation then reports by name.
      char *stop = nullptr;
      const double v = std::strtod(token.c_str(), &stop);
      if (token.empty() || stop != token.c_str() + token.size()) bad_value(what, r, token);
      m(r, c++) = v;
      start = end + 1;
    }
    if (c != cols)
      throw ValidationError(std::string(what) + " line " + std::to_string(r + 1) + ": expected " +
                            std::to_string(cols) + " columns, found " + std::to_string(c));
  }
  return m;
}

std::string labels_to_csv(const std::vector<std::size_t> &labels) {
  std::string out;
  for (std::size_t y : labels) {
    out += std::to_string(y);
    out += '\n';
  }
  return out;
}

std::vector<std::size_t> labels_from_csv(std::string_view text, std::string_view what) {
  const auto lines = split_lines(text);
  std::vector<std::size_t> labels(lines.size());
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto line = lines[r];
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), labels[r]);
    if (ec != std::errc() || ptr != line.data() + line.size()) bad_value(what, r, line);
  }
  return labels;
}

} // namespace cyclegzsl
