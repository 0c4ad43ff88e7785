#include <iostream>

#include "mirnav/cli/commands.hpp"

int main(int argc, char** argv) { return mirnav::cli::run(argc, argv, std::cout, std::cerr); }
