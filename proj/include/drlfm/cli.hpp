#pragma once

#include <string>
#include <vector>

namespace drlfm {

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 2 usage or validation failure, 3 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace drlfm
