#include "arm3d/cli/commands.hpp"

int main(int argc, char** argv) { return arm3d::cli::run(argc, argv); }
