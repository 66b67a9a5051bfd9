#pragma once

#include <iosfwd>

namespace pathflow {

/// Command line entry point, kept in the library so tests can drive it:
///   run <config|builtin> [--seed S] [--paths P] [--steps N] [--out FILE] [--trace FILE]
///                        [--workers W] [--serial]
///   list
///   describe <check|builtin>
///   acceptance [--workers W]
/// Returns the exit code: 0 all pass, 1 some check failed, 2 config or usage error,
/// 3 runtime error (a check errored or a file could not be written).
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pathflow
