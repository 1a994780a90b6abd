#include "aclab/cli.hpp"

int main(int argc, char** argv) { return aclab::cli_main(argc, argv); }
