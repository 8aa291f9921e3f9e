#include "mhspna/cli.hpp"

int main(int argc, char** argv) { return mhspna::cli::run(argc, argv); }
