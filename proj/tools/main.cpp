#include "bdlab/cli.hpp"

int main(int argc, char** argv) { return bdlab::cli::run(argc, argv); }
