// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "vkg/cli.hpp"

int main(int argc, char** argv) { return vkg::cli::run(argc, argv, std::cout, std::cerr); }
