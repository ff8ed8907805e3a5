#include "dak/cli.hpp"

int main(int argc, char** argv) { return dak::cli_main(argc, argv); }
