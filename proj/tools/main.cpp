#include <iostream>

#include "ani/cli.hpp"

int main(int argc, char** argv) { return ani::cli::dispatch(argc, argv, std::cout, std::cerr); }
