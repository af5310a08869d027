#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>

namespace kgsw {

using TsvRowFn =
    std::function<void(std::span<const std::string_view> fields, std::size_t line)>;

// Calls fn for every non-blank line of a tab-separated file. Lines whose
// field count falls outside [min_fields, max_fields] raise a parse error
// carrying the 1-based line number.
void for_each_tsv_row(const std::filesystem::path& path, std::size_t min_fields,
                      std::size_t max_fields, const TsvRowFn& fn);

inline void for_each_tsv_row(const std::filesystem::path& path,
                             std::size_t fields, const TsvRowFn& fn) {
  for_each_tsv_row(path, fields, fields, fn);
}

std::uint32_t parse_id(std::string_view field, const std::filesystem::path& path,
                       std::size_t line);
double parse_real(std::string_view field, const std::filesystem::path& path,
                  std::size_t line);

}  // namespace kgsw
