#include "pathflow/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pathflow::cli_main(argc, argv, std::cout, std::cerr); }
