#include "vidcap/cli.hpp"

int main(int argc, char** argv) { return vidcap::cli::run(argc, argv); }
