#pragma once

#include <string_view>

namespace tamperscan {

// Files compiled into the library: test-bed templates and bundled scripts,
// looked up by file name. Empty when unknown.
std::string_view asset(std::string_view name);

}  // namespace tamperscan
