#include <iostream>

#include "mvad/cli.hpp"

int main(int argc, char** argv) { return mvad::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
