#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace flowforge {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitUsage = 2, kExitRuntime = 3 };

/// Entry point of the `flowforge` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

std::string tool_version();

}  // namespace flowforge
