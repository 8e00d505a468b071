#pragma once

#include <functional>
#include <string_view>

namespace damseep {

/// Receives library warnings (non-fatal conditions a caller may want to surface).
/// The default handler writes `warning: <msg>` to stderr.
using WarningHandler = std::function<void(std::string_view)>;

/// Installs a handler and returns the previous one. Pass an empty function to silence.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace damseep
