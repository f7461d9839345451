#include <iostream>

#include "viewrank/cli.hpp"

int main(int argc, char** argv) { return viewrank::run_cli(argc, argv, std::cout, std::cerr); }
