#include <iostream>

#include "neld/cli.hpp"

int main(int argc, char** argv) { return neld::cli_main(argc, argv, std::cout, std::cerr); }
