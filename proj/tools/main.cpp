#include <iostream>

#include "hetfraud/cli.hpp"

int main(int argc, char** argv) { return hetfraud::cli::run(argc, argv, std::cout, std::cerr); }
