#include "cli.hpp"

int main(int argc, char** argv) { return hazesplat::cli::run(argc, argv); }
