#include <iostream>

#include "ldsb/cli.hpp"

int main(int argc, char** argv) { return ldsb::cli::run(argc, argv, std::cout, std::cerr); }
