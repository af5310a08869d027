#include "kgsw/tsv.hpp"

#include <charconv>
#include <fstream>
#include <vector>

#include "kgsw/error.hpp"

namespace kgsw {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& what) {
  throw Error(ErrorKind::parse,
              path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void for_each_tsv_row(const std::filesystem::path& path, std::size_t min_fields,
                      std::size_t max_fields, const TsvRowFn& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string buf;
  std::vector<std::string_view> fields;
  std::size_t line = 0;
  while (std::getline(in, buf)) {
    ++line;
    std::string_view row(buf);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.find_first_not_of(" \t") == std::string_view::npos) continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const auto tab = row.find('\t', start);
      fields.push_back(row.substr(start, tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() < min_fields || fields.size() > max_fields) {
      fail(path, line, "expected " + std::to_string(min_fields) +
                           (min_fields == max_fields
                                ? ""
                                : "-" + std::to_string(max_fields)) +
                           " tab-separated fields, got " +
                           std::to_string(fields.size()));
    }
    fn(fields, line);
  }
}

std::uint32_t parse_id(std::string_view field, const std::filesystem::path& path,
                       std::size_t line) {
  std::uint64_t value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty() || value >= 0xffffffffull) {
    fail(path, line, "invalid id '" + std::string(field) + "'");
  }
  return static_cast<std::uint32_t>(value);
}

double parse_real(std::string_view field, const std::filesystem::path& path,
                  std::size_t line) {
  try {
    std::size_t used = 0;
    const std::string s(field);
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(path, line, "invalid number '" + std::string(field) + "'");
  }
}

}  // namespace kgsw
