// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfod/cli.hpp"

int main(int argc, char** argv) { return sfod::cli::run(argc, argv); }
