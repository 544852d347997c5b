#include "uc2/cli.hpp"

int main(int argc, char** argv) { return uc2::run_cli(argc, argv); }
