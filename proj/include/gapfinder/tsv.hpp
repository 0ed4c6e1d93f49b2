#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gapfinder::tsv {

std::vector<std::string_view> split(std::string_view line, char sep = '\t');

// Reads a header-first TSV file. `required` columns must appear first and in
// order; `optional` columns may follow. The callback receives the 1-based line
// number and the fields, padded with empty strings for absent optional columns.
// Returns the number of data rows.
std::size_t read(const std::filesystem::path& path, std::span<const std::string_view> required,
                 std::span<const std::string_view> optional,
                 const std::function<void(std::size_t, std::span<const std::string_view>)>& row);

std::int64_t parse_int(std::string_view field, const std::filesystem::path& file, std::size_t line,
                       std::string_view column);
bool parse_bool(std::string_view field, const std::filesystem::path& file, std::size_t line,
                std::string_view column);
double parse_double(std::string_view field, const std::filesystem::path& file, std::size_t line,
                    std::string_view column);

// Shortest round-trip representation.
std::string format_double(double value);
// Fixed number of decimals.
std::string format_fixed(double value, int decimals);

class Writer {
 public:
  Writer(const std::filesystem::path& path, std::span<const std::string_view> header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((put(fields, first)), ...);
    out_ << '\n';
  }

  void raw_row(std::span<const std::string> fields);

 private:
  void put(std::string_view field, bool& first) {
    if (!first) out_ << '\t';
    out_ << field;
    first = false;
  }
  void put(const std::string& field, bool& first) { put(std::string_view(field), first); }
  void put(const char* field, bool& first) { put(std::string_view(field), first); }
  template <typename Int>
    requires std::is_integral_v<Int>
  void put(Int value, bool& first) {
    put(std::string_view(std::to_string(value)), first);
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace gapfinder::tsv
