// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/cli.hpp"

int main(int argc, char** argv) { return skillassess::run_cli(argc, argv); }
