#include "aliascope/cli/commands.hpp"

int main(int argc, char** argv) { return aliascope::cli::run_cli(argc, argv); }
