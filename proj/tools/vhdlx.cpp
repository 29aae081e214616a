#include "vhdlx/cli.hpp"

int main(int argc, char** argv) { return vhdlx::cli::run(argc, argv); }
