#include <iostream>

#include "minrepair/cli.hpp"

int main(int argc, char** argv) { return minrepair::cli::cli_dispatch(argc, argv, std::cout, std::cerr); }
