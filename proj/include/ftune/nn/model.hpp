// Copyright 2026 The ftune Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ftune/core.hpp"
#include "ftune/nn/autodiff.hpp"
#include "ftune/nn/param_store.hpp"

namespace ftune::nn {

struct ModelConfig {
  int image_size = 24;
  int patch_size = 4;
  int channels = 3;
  int embed_dim = 32;
  int num_heads = 4;
  int head_dim = 8;
  int num_blocks = 4;
  int ffn_hidden = 128;
  int num_classes = 4;

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
  int grid() const { return image_size / patch_size; }
  int num_patches() const { return grid() * grid(); }
  int patch_dim() const { return channels * patch_size * patch_size; }

  bool operator==(const ModelConfig&) const = default;
};

/// Optional capture of intermediate activations during a forward pass.
struct ForwardTrace {
  std::vector<Matrix> attention;  // one (patches x patches) matrix per block per head
};

/// Parameter indices of one encoder block.
struct BlockParams {
  std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t w1, b1, w2, b2;
};

/// Mini vision transformer with a per-patch linear segmentation head.
///
/// Post-norm blocks: X <- LN(X + MHA(X)), X <- LN(X + FFN(X)). The model
/// only holds indices into a ParamStore, so one model can evaluate any
/// number of parameter snapshots concurrently.
class SegmentationTransformer {
 public:
  static std::pair<SegmentationTransformer, ParamStore> build(const ModelConfig& config,
                                                              std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// Rebinds to a store loaded from disk; throws if names/shapes differ.
  static SegmentationTransformer bind(const ModelConfig& config, const ParamStore& store);

  /// Replaces the decoder with a freshly initialized one for `num_classes`.
  void reset_decoder(ParamStore& store, int num_classes, std::uint64_t seed);

  /// image: channels x (H*W), row-major pixels. Returns (patches x classes) logits.
  Var forward(Tape& tape, const ParamStore& store, const Matrix& image,
              ForwardTrace* trace = nullptr) const;

  /// Final token features (patches x embed_dim) before the decoder.
  Var features(Tape& tape, const ParamStore& store, const Matrix& image,
               ForwardTrace* trace = nullptr) const;
  Var decode(Tape& tape, const ParamStore& store, Var features) const;

  /// Patch embedding plus positional embedding.
  Var embed(Tape& tape, const ParamStore& store, const Matrix& image) const;
  /// Runs the encoder blocks on any (tokens x embed_dim) input.
  Var encode(Tape& tape, const ParamStore& store, Var tokens, ForwardTrace* trace = nullptr) const;

  /// Inference-only convenience wrapper; throws NumericalError on NaN/Inf.
  Matrix logits(const ParamStore& store, const Matrix& image) const;

  Matrix patchify(const Matrix& image) const;

  std::size_t decoder_weight() const { return dec_w_; }
  std::size_t decoder_bias() const { return dec_b_; }

 private:
  explicit SegmentationTransformer(ModelConfig config) : config_(config) {}
  void index(const ParamStore& store);

  ModelConfig config_;
  std::size_t embed_w_ = 0, embed_b_ = 0, pos_ = 0;
  std::vector<BlockParams> blocks_;
  std::size_t dec_w_ = 0, dec_b_ = 0;
};

/// Mean cross-entropy over patches.
Var loss_ce(Var logits, std::span<const int> labels);

}  // namespace ftune::nn
