// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include <gtest/gtest.h>

#include "cldg/architectures.hpp"
#include "cldg/checkpoint.hpp"
#include "cldg/error.hpp"
#include "cldg/insertion.hpp"
#include "oracles.hpp"

namespace cldg {
namespace {

using oracle::random_tensor;

void randomize_correction(ModelGraph& m, Rng& rng) {
  for (double& v : m.layer(*m.correction_index()).parameter_tensors()[0]->data()) {
    v = rng.uniform(-0.5, 0.5);
  }
}

TEST(Insert, LohCentreAddsSquareOfChannels) {
  const ModelGraph base = build_from_config(shipped_architecture("loh2022_standin"), 1);
  const std::size_t p = 11;
  const std::size_t c = base.output_shape_of(p).channels;
  const ModelGraph m = insert_correction(base, CorrectionKind::inter_channel, p);
  EXPECT_EQ(m.parameter_count(), base.parameter_count() + c * c);
  EXPECT_EQ(m.trainable_parameter_count(), c * c);
  EXPECT_EQ(m.size(), base.size() + 1);
  EXPECT_EQ(*m.correction_index(), p + 1);
}

TEST(Insert, RejectsBadPositionsAndSecondCorrection) {
  const ModelGraph base = build_from_config(shipped_architecture("parmar_standin"));
  EXPECT_THROW(insert_correction(base, CorrectionKind::channel_wise, base.size() - 1), ArgumentError);
  EXPECT_THROW(insert_correction(base, CorrectionKind::channel_wise, 99), ArgumentError);
  const ModelGraph m = insert_correction(base, CorrectionKind::channel_wise, 1);
  EXPECT_THROW(insert_correction(m, CorrectionKind::inter_channel, 0), ArgumentError);
}

TEST(Insert, PositionsAndBlockBoundaries) {
  const ModelGraph m = build_from_config(shipped_architecture("loh2022_standin"));
  EXPECT_EQ(insertion_positions(m).size(), m.size() - 1);
  const auto b = block_boundaries(m);
  ASSERT_FALSE(b.empty());
  for (std::size_t p : b) {
    const auto k = m.layer(p + 1).kind();
    EXPECT_TRUE(k == LayerKind::conv1d || k == LayerKind::fc || k == LayerKind::gap);
  }
}

TEST(Insert, UntrainedCorrectionChangesNoLogit) {
  Rng rng(21);
  std::vector<nlohmann::json> archs;
  for (const auto& n : shipped_architecture_names()) archs.push_back(shipped_architecture(n));
  for (int i = 0; i < 10; ++i) archs.push_back(oracle::random_small_arch(rng));
  for (const auto& cfg : archs) {
    const ModelGraph base = build_from_config(cfg, rng.next_u64());
    const Tensor x = random_tensor(base.input_shape().shape(), rng);
    const Tensor ref = forward(base, x).logits;
    for (std::size_t p : insertion_positions(base)) {
      for (auto kind : {CorrectionKind::channel_wise, CorrectionKind::inter_channel}) {
        EXPECT_EQ(forward(insert_correction(base, kind, p), x).logits, ref) << "position " << p;
      }
    }
  }
}

TEST(Fold, HandWorkedOneByOneConv) {
  ConvParams conv = ConvParams::zeros(2, 2, 1);
  conv.weights = Tensor({2, 2, 1}, {2.0, 3.0, 0.0, 0.0});
  const ModelGraph base({2, 1}, {LayerSpec{ReluLayer{}}, LayerSpec{conv}}, {"N", "AF"});
  ModelGraph m = insert_correction(base, CorrectionKind::inter_channel, 0);
  *m.layer(1).parameter_tensors()[0] = Tensor::from_rows({{0, 1}, {0, 0}});
  const ModelGraph f = fold_correction(m);
  const auto& merged = std::get<ConvParams>(f.layer(1).params);
  EXPECT_EQ(merged.weights, Tensor({2, 2, 1}, {2.0, 5.0, 0.0, 0.0}));
  const Tensor x = Tensor::from_rows({{1}, {1}});
  EXPECT_EQ(forward(f, x).logits[0], 7.0);
  EXPECT_EQ(forward(m, x).logits[0], 7.0);
}

TEST(Fold, ChannelWiseScalesTargetColumns) {
  Rng rng(22);
  const ModelGraph base = build_from_config(
      {{"input", {{"channels", 4}, {"length", 6}}},
       {"layers", {{{"kind", "relu"}}, {{"kind", "conv1d"}, {"out_channels", 3}, {"kernel_len", 2}},
                   {{"kind", "relu"}}, {{"kind", "fc"}, {"out", 2}}}},
       {"classes", {"N", "AF"}}},
      7);
  ModelGraph m = insert_correction(base, CorrectionKind::channel_wise, 0);
  randomize_correction(m, rng);
  const Tensor w = *m.layer(1).parameter_tensors()[0];
  const ModelGraph f = fold_correction(m);
  const auto& before = std::get<ConvParams>(base.layer(1).params);
  const auto& after = std::get<ConvParams>(f.layer(1).params);
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t k = 0; k < 2; ++k) {
        const std::size_t at = (o * 4 + i) * 2 + k;
        EXPECT_EQ(after.weights[at], before.weights[at] * (w[i] + 1.0));
      }
    }
  }
  for (int n = 0; n < 100; ++n) {
    const Tensor x = random_tensor({4, 6}, rng);
    EXPECT_LT(max_abs_diff(forward(f, x).logits, forward(m, x).logits), 1e-9);
  }
}

TEST(Fold, SoundOnRandomModelsAndInputs) {
  Rng rng(23);
  std::vector<nlohmann::json> archs;
  for (const auto& n : shipped_architecture_names()) archs.push_back(shipped_architecture(n));
  for (int i = 0; i < 6; ++i) archs.push_back(oracle::random_small_arch(rng));
  std::size_t checked = 0;
  for (const auto& cfg : archs) {
    ModelGraph base = build_from_config(cfg, rng.next_u64());
    oracle::randomize_parameters(base, rng, 0.3);
    for (std::size_t p : insertion_positions(base)) {
      if (!base.layer(p + 1).is_linear_merge_target()) continue;
      for (auto kind : {CorrectionKind::channel_wise, CorrectionKind::inter_channel}) {
        ModelGraph m = insert_correction(base, kind, p);
        randomize_correction(m, rng);
        const ModelGraph f = fold_correction(m);
        EXPECT_EQ(f.size(), base.size());
        EXPECT_FALSE(f.correction_index().has_value());
        const int inputs = base.input_shape().numel() > 200 ? 20 : 1000;
        double worst = 0.0;
        for (int n = 0; n < inputs; ++n) {
          const Tensor x = random_tensor(base.input_shape().shape(), rng);
          worst = std::max(worst, max_abs_diff(forward(f, x).logits, forward(m, x).logits));
        }
        EXPECT_LT(worst, 1e-9) << "position " << p;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 20u);
}

TEST(Fold, NonLinearTargetIsUnsupportedAndLeavesModelIntact) {
  const ModelGraph base = build_from_config(shipped_architecture("loh2022_standin"), 2);
  const ModelGraph m = insert_correction(base, CorrectionKind::inter_channel, 0);
  ASSERT_EQ(m.layer(2).kind(), LayerKind::relu);
  const auto before = save_checkpoint(m);
  try {
    fold_correction(m);
    FAIL() << "expected UnsupportedFoldError";
  } catch (const UnsupportedFoldError& e) {
    EXPECT_EQ(e.category(), "unsupported-fold");
  }
  EXPECT_EQ(save_checkpoint(m), before);
  EXPECT_THROW(fold_correction(base), ArgumentError);
}

}  // namespace
}  // namespace cldg
