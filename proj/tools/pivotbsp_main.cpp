#include "pivotbsp/cli.hpp"

int main(int argc, char** argv) { return pivotbsp::cli_main(argc, argv); }
