#include "greg/cli.hpp"

int main(int argc, char **argv) { return greg::cli_main(argc, argv); }
