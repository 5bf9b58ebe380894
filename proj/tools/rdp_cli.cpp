#include "rdp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rdp::cli::run(argc, argv, std::cout, std::cerr); }
