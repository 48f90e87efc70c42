#include <iostream>

#include "dvnee/cli.hpp"

int main(int argc, char** argv) { return dvnee::cli::run(argc, argv, std::cout, std::cerr); }
