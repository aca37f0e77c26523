// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "tokprune/baselines.hpp"
#include "tokprune/cost_model.hpp"
#include "tokprune/diagnostics.hpp"
#include "tokprune/error.hpp"
#include "tokprune/matrix.hpp"
#include "tokprune/pos_embed.hpp"
#include "tokprune/result_io.hpp"
#include "tokprune/stage1.hpp"
#include "tokprune/stage2.hpp"
#include "tokprune/synthetic.hpp"
#include "tokprune/tensor_store.hpp"

namespace tokprune {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tokprune
