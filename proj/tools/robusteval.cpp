#include "cli.hpp"

int main(int argc, char** argv) { return robusteval::cli::run(argc, argv); }
