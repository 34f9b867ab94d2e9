#include "cli.hpp"

int main(int argc, char** argv) { return fieldgraph::cli::run(argc, argv); }
