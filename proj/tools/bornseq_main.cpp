#include <iostream>

#include "bornseq/cli.hpp"

int main(int argc, char** argv) { return bornseq::cli::run(argc, argv, std::cout, std::cerr); }
