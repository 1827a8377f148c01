// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace mum::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kConfigError = 2,
};

/// Runs the `mum` command line. Never throws; failures map to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace mum::cli
