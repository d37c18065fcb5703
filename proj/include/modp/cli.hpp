// SPDX-License-Identifier: MIT
#ifndef MODP_CLI_HPP
#define MODP_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace modp::cli {

// Dispatches one command: collect, slice, train, train-slider, train-invdyn,
// train-predictor, eval, or report. Returns the process exit code: 0 on
// success, 2 on configuration errors, 3 on missing prerequisites, 1 on any
// other failure. Output goes to the given streams so tests can capture it.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Convenience overload writing to std::cout / std::cerr.
int run(const std::vector<std::string>& args);

}  // namespace modp::cli

#endif
