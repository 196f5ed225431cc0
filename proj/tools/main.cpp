#include "fvmatch/cli.hpp"

int main(int argc, char** argv) { return fvmatch::run_cli(argc, argv); }
