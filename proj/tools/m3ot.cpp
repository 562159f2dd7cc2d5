#include <iostream>

#include "m3ot/cli.hpp"

int main(int argc, char** argv) { return m3ot::run_cli(argc, argv, std::cout, std::cerr); }
