// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Umbrella header. The CLI front end (sfod/cli.hpp) is separate because it
// pulls in CLI11.

#pragma once

#include "sfod/augment.hpp"
#include "sfod/backends.hpp"
#include "sfod/corrupt.hpp"
#include "sfod/ema.hpp"
#include "sfod/eval.hpp"
#include "sfod/geometry.hpp"
#include "sfod/pipeline.hpp"
#include "sfod/pseudo_label.hpp"
#include "sfod/tensor_io.hpp"
