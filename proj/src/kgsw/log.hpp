#pragma once

#include <functional>
#include <string>

namespace kgsw {

using WarningHandler = std::function<void(const std::string&)>;

// Process-wide sink for non-fatal diagnostics. The default handler writes
// "warning: <msg>" to stderr. Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);
WarningHandler default_warning_handler();
void warn(const std::string& message);

}  // namespace kgsw
