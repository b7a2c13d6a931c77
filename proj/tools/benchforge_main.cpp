#include "benchforge/cli/commands.hpp"

int main(int argc, char** argv) { return benchforge::cli::run(argc, argv); }
