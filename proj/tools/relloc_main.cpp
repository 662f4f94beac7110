#include "relloc/cli.hpp"

int main(int argc, char** argv) { return relloc::cli::run(argc, argv); }
