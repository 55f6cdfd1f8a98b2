#include "zoneliq/cli.hpp"

int main(int argc, char** argv) { return zoneliq::run_cli(argc, argv); }
