#include <iostream>

#include "synthprod/cli.hpp"

int main(int argc, char** argv) { return synthprod::cli::dispatch(argc, argv, std::cout, std::cerr); }
