#include "qlpd/cli.hpp"

int main(int argc, char** argv) { return qlpd::cli::run(argc, argv); }
