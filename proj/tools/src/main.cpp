#include <iostream>

#include "alphameta/cli.hpp"

int main(int argc, char** argv) { return alphameta::run_cli(argc, argv, std::cout, std::cerr); }
