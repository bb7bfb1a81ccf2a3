#include <iostream>

#include "ared/cli.hpp"

int main(int argc, char** argv) { return ared::run_cli(argc, argv, std::cout, std::cerr); }
