#include "hiergen/cli.hpp"

int main(int argc, char** argv) { return hiergen::run_cli(argc, argv); }
