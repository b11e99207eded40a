#include "hwcost/cli.hpp"

int main(int argc, char** argv) { return hwcost::cli::run(argc, argv); }
