// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "mcdn/cli.hpp"

int main(int argc, char **argv) { return mcdn::cli::run(argc, argv, std::cout, std::cerr); }
