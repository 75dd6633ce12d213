#include "cowdet/cli.hpp"

int main(int argc, char** argv) { return cowdet::run_cli(argc, argv); }
