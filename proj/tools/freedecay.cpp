#include <iostream>

#include "freedecay/cli.hpp"

int main(int argc, char** argv) { return freedecay::cli::run(argc, argv, std::cout, std::cerr); }
