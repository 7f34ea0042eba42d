#include "dfac/cli/commands.hpp"

int main(int argc, char** argv) { return dfac::cli::run(argc, argv); }
