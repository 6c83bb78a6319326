#include "wgf/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return wgf::run_cli(argc, argv, std::cout, std::cerr); }
