// SPDX-License-Identifier: MIT
#include "modp/cli.hpp"

int main(int argc, char** argv) {
    return modp::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
