#include "sacr2/cli.hpp"

int main(int argc, char** argv) { return sacr2::cli_main(argc, argv); }
