#include "pllab/cli.hpp"

int main(int argc, char** argv) { return pllab::run_cli(argc, argv); }
