#pragma once

#include <functional>
#include <string_view>

namespace occhmm {

using WarningSink = std::function<void(std::string_view)>;

/// Installs the sink for non-fatal warnings; returns the previous one.
/// The default sink writes to stderr.
WarningSink set_warning_sink(WarningSink sink);

void warn(std::string_view message);

}  // namespace occhmm
