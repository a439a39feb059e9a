#pragma once

#include <string>
#include <vector>

namespace jointgan {

/// Verbs: gen-data, train, sample, eval, gradcheck, confusion, export-plots.
/// Exit codes: 0 success, 1 module error (one-line diagnostic on stderr),
/// 2 usage error. Every successful run writes a manifest.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace jointgan
