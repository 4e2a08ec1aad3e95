#pragma once

#include <functional>
#include <string>

namespace ptrap {

using LogSink = std::function<void(const std::string&)>;

/// Route library warnings; the default sink writes to stderr. Passing an
/// empty function restores the default. Returns the previous sink.
LogSink set_warning_sink(LogSink sink);

void warn(const std::string& message);

}  // namespace ptrap
