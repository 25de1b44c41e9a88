#pragma once

namespace jlsgev::cli {

// Parses argv, dispatches the subcommand, and maps failures to the exit-code
// convention: 0 success, 2 validation, 3 convergence, 4 I/O.
int run(int argc, char** argv);

}  // namespace jlsgev::cli
