#include <iostream>

#include "h2r/commands.hpp"

int main(int argc, char** argv) { return h2r::run_cli(argc, argv, std::cout, std::cerr); }
