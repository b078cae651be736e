#include <iostream>

#include "relikit/io/cli.hpp"

int main(int argc, char** argv) { return relikit::io::run_cli(argc, argv, std::cout, std::cerr); }
