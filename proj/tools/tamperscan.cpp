#include "tamperscan/cli.hpp"

int main(int argc, char** argv) { return tamperscan::run_cli(argc, argv); }
