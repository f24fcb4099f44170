#include "opm/cli.hpp"

int main(int argc, char** argv) { return opm::cli_main(argc, argv); }
