// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/cli.hpp"

int main(int argc, char** argv) { return mum::cli::run(argc, argv); }
