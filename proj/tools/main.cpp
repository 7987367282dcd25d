#include "retouch/cli/commands.hpp"

int main(int argc, char** argv) { return retouch::cli::run(argc, argv); }
