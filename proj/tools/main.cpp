#include "commands.hpp"

int main(int argc, char** argv) { return jlsgev::cli::run(argc, argv); }
