#include <iostream>

#include "depbench/cli.hpp"

int main(int argc, char** argv) { return depbench::cli::run(argc, argv, std::cout, std::cerr); }
