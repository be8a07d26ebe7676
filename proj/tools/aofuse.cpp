// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/cli.hpp"

int main(int argc, char** argv) { return aofuse::dispatch(argc, argv); }
