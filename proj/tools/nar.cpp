#include "nar/cli/cli.hpp"

int main(int argc, char** argv) { return nar::cli::run_cli(argc, argv); }
