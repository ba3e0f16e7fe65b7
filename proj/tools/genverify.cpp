#include <iostream>

#include "genverify/cli.hpp"

int main(int argc, char** argv) { return genverify::run_cli(argc, argv, std::cout, std::cerr); }
