#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace refract {

// Exit codes of the command-line front end.
enum ExitCode : int {
    exit_ok = 0,
    exit_validation = 1,
    exit_numeric = 2,
    exit_verification = 3,
};

/// Runs one command; args excludes the program name. Errors go to err as "error[Code]: message".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Fixed CSV number format: 12 significant digits.
std::string csv_number(double v);

} // namespace refract
