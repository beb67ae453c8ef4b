#include <iostream>

#include "powerdiv/cli.hpp"

int main(int argc, char** argv) { return powerdiv::cli::run(argc, argv, std::cout, std::cerr); }
