#include "thintube/cli.hpp"

int main(int argc, char** argv) { return thintube::cli::run(argc, argv); }
