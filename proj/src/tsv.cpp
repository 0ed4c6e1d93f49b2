#include "gapfinder/tsv.hpp"

#include <charconv>
#include <cstdio>

#include "gapfinder/error.hpp"

namespace gapfinder::tsv {

namespace {

std::string where(const std::filesystem::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

}  // namespace

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::size_t read(const std::filesystem::path& path, std::span<const std::string_view> required,
                 std::span<const std::string_view> optional,
                 const std::function<void(std::size_t, std::span<const std::string_view>)>& row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, path.string());

  std::string line;
  if (!std::getline(in, line)) {
    throw Error(Errc::MalformedRow, where(path, 1) + ": missing header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line);
  if (header.size() < required.size() || header.size() > required.size() + optional.size()) {
    throw Error(Errc::MalformedRow, where(path, 1) + ": unexpected header '" + line + "'");
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto expected = i < required.size() ? required[i] : optional[i - required.size()];
    if (header[i] != expected) {
      throw Error(Errc::MalformedRow, where(path, 1) + ": expected column '" +
                                          std::string(expected) + "', found '" +
                                          std::string(header[i]) + "'");
    }
  }
  const std::size_t width = required.size() + optional.size();
  const std::size_t present = header.size();

  std::size_t line_no = 1;
  std::size_t rows = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields = split(line);
    if (fields.size() != present) {
      throw Error(Errc::MalformedRow, where(path, line_no) + ": expected " +
                                          std::to_string(present) + " fields, found " +
                                          std::to_string(fields.size()));
    }
    fields.resize(width, std::string_view{});
    row(line_no, fields);
    ++rows;
  }
  return rows;
}

std::int64_t parse_int(std::string_view field, const std::filesystem::path& file, std::size_t line,
                       std::string_view column) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw Error(Errc::MalformedRow, where(file, line) + ": column '" + std::string(column) +
                                        "' is not an integer: '" + std::string(field) + "'");
  }
  return value;
}

bool parse_bool(std::string_view field, const std::filesystem::path& file, std::size_t line,
                std::string_view column) {
  if (field == "1" || field == "true") return true;
  if (field == "0" || field == "false" || field.empty()) return false;
  throw Error(Errc::MalformedRow, where(file, line) + ": column '" + std::string(column) +
                                      "' is not a boolean: '" + std::string(field) + "'");
}

double parse_double(std::string_view field, const std::filesystem::path& file, std::size_t line,
                    std::string_view column) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw Error(Errc::MalformedRow, where(file, line) + ": column '" + std::string(column) +
                                        "' is not a number: '" + std::string(field) + "'");
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  std::string s(buf);
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

Writer::Writer(const std::filesystem::path& path, std::span<const std::string_view> header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(Errc::MissingFile, "cannot write " + path.string());
  bool first = true;
  for (auto column : header) put(column, first);
  out_ << '\n';
}

void Writer::raw_row(std::span<const std::string> fields) {
  bool first = true;
  for (const auto& f : fields) put(f, first);
  out_ << '\n';
}

}  // namespace gapfinder::tsv
