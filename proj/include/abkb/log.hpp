#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace abkb {

using WarningSink = std::function<void(std::string_view)>;

/// Routes library warnings; the default sink writes to stderr. Pass an empty
/// function to silence them. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);

void warn(std::string_view message);

}  // namespace abkb
