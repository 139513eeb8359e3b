#include <iostream>

#include "trilost/cli.hpp"

int main(int argc, char** argv) { return trilost::cli_main(argc, argv, std::cout, std::cerr); }
