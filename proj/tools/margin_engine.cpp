#include "margin/cli.hpp"

int main(int argc, char** argv) { return margin::run_cli(argc, argv); }
