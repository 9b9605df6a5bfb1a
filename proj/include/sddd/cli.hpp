#ifndef SDDD_CLI_HPP
#define SDDD_CLI_HPP

#include <string>
#include <vector>

namespace sddd {

// Entry point behind the sddd binary; args exclude the program name.
// Exit codes: 0 success, 1 domain error, 2 I/O error.
int run_cli(const std::vector<std::string> &args);

}  // namespace sddd

#endif  // SDDD_CLI_HPP
