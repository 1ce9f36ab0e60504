#pragma once

namespace pllab {

/// Entry point for the pllab tool. Subcommands: gen, train, sweep, dynamics,
/// check, noise-matrix. Exit codes: 0 success, 1 verdict failure (check),
/// 2 usage or I/O error.
int run_cli(int argc, const char* const* argv);

}  // namespace pllab
