#pragma once

#include <iosfwd>

namespace btp {

// Entry point behind the btpredict binary. Subcommands: dag stats, learn,
// predict, evaluate, generate. Data goes to `out`, diagnostics to `err`.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 inference error
// (no compatible tree).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace btp
