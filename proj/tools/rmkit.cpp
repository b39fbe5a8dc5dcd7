#include <iostream>

#include "rmkit/cli.hpp"

int main(int argc, char** argv) { return rmkit::cli::run(argc, argv, std::cout, std::cerr); }
