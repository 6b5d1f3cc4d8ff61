#include <iostream>

#include "surf/cli.hpp"

int main(int argc, char** argv) { return surf::run_cli(argc, argv, std::cout, std::cerr); }
