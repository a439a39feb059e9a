#include "jointgan/cli.hpp"

int main(int argc, char** argv) { return jointgan::run_cli(argc, argv); }
