#include "gramufen/cli.hpp"

int main(int argc, char** argv) { return gramufen::cli_main(argc, argv); }
