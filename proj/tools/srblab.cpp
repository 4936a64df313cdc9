#include <iostream>

#include "srblab/cli.hpp"

int main(int argc, char** argv) { return srblab::parse_and_dispatch(argc, argv, std::cout, std::cerr); }
