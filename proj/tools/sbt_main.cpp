#include <sbt/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return sbt::cli::run_cli(argc, argv, std::cout, std::cerr); }
