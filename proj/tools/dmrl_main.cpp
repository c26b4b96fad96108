#include <iostream>

#include "dmrl/cli.hpp"

int main(int argc, char** argv) { return dmrl::run_cli(argc, argv, std::cout, std::cerr); }
