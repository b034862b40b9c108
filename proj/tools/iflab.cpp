// SPDX-License-Identifier: Apache-2.0

#include "ifl/cli.hpp"

int main(int argc, char** argv) { return ifl::cli::run(argc, argv); }
