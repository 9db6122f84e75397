#include <iostream>

#include "levycouple/cli.hpp"

int main(int argc, char** argv) { return levycouple::cli::run(argc, argv, std::cout, std::cerr); }
