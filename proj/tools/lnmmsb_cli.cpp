#include <iostream>

#include "lnmmsb/cli.hpp"

int main(int argc, char** argv) { return lnmmsb::cli_main(argc, argv, std::cout, std::cerr); }
