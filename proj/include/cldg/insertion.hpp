// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <vector>

#include "cldg/correction.hpp"
#include "cldg/model.hpp"

namespace cldg {

/// Every inter-layer position of a correction-free graph: after each layer
/// except the last.
std::vector<std::size_t> insertion_positions(const ModelGraph& m);

/// Positions that end a block, i.e. whose next layer is conv1d, fc or gap.
/// A correction layer placed there sees the block's full (post-activation,
/// post-pooling) output.
std::vector<std::size_t> block_boundaries(const ModelGraph& m);

/// Copy of m with a zero-initialized (identity) correction layer after base
/// layer `position`. Every other layer is frozen; the correction layer is
/// trainable.
ModelGraph insert_correction(const ModelGraph& m, CorrectionKind kind, std::size_t position);

/// Merges the correction layer into the following conv1d/fc layer:
/// conv K'[o,j,k] = sum_i K[o,i,k] * M[i,j]; fc W'[o, j*L+t] = sum_i W[o, i*L+t] * M[i,j]
/// with M = W + I (or diag(w + 1)). Throws UnsupportedFoldError when the next
/// layer is not linear; the input model is left untouched.
ModelGraph fold_correction(const ModelGraph& m);

}  // namespace cldg
