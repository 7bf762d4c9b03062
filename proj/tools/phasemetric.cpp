#include "phasemetric/cli.hpp"

int main(int argc, char** argv) { return phasemetric::cli::run_command(argc, argv); }
