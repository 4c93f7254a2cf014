#include "tvc/cli/cli.hpp"

int main(int argc, char** argv) { return tvc::cli::run(argc, argv); }
