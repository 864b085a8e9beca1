// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fkb::cli {

/// Runs one command line (without the program name). Exit codes: 0 ok,
/// 1 diagnostics or errors, 2 usage.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

/// Makes a running `serve` return. Safe to call from a signal handler.
void request_stop();

}  // namespace fkb::cli
