#include <iostream>

#include "pid/cli.hpp"

int main(int argc, char **argv) { return pid::cli::run(argc, argv, std::cout, std::cerr); }
