#include "marc/cli.hpp"

int main(int argc, char** argv) { return marc::run_cli(argc, argv); }
