#include <iostream>

#include "scbf/cli.hpp"

int main(int argc, char** argv) { return scbf::run_cli(argc, argv, std::cout, std::cerr); }
