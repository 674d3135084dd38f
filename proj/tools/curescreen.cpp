#include <iostream>

#include "curescreen/commands.hpp"

int main(int argc, char** argv) { return curescreen::run_cli(argc, argv, std::cout, std::cerr); }
