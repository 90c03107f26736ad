#include "vastopo/cli.hpp"

int main(int argc, char** argv) { return vastopo::run_cli(argc, argv); }
