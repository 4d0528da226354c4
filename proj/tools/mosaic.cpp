#include <iostream>

#include "mosaic/cli/cli.hpp"

int main(int argc, char** argv) { return mosaic::cli::run(argc, argv, std::cout, std::cerr); }
