#include "voxel2vec/cli.hpp"

int main(int argc, char** argv) { return voxel2vec::cli::run(argc, argv); }
