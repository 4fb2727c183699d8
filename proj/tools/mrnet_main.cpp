#include "mrnet/cli.hpp"

int main(int argc, char** argv) { return mrnet::cli::run(argc, argv); }
