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

#include "ftune/nn/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ftune::nn {

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  // Fill in row-major order so the draw sequence does not depend on storage order.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

Matrix fan_in_weight(int fan_in, int fan_out, Rng& rng) {
  return uniform(fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

std::string block_name(int l, const char* what) {
  return "blocks." + std::to_string(l) + "." + what;
}

std::size_t require(const ParamStore& store, const std::string& name, Eigen::Index rows,
                    Eigen::Index cols) {
  const auto idx = store.find(name);
  if (!idx) throw std::invalid_argument("parameter store is missing '" + name + "'");
  const Matrix& m = store[*idx].value;
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument("parameter '" + name + "' has shape " + std::to_string(m.rows()) +
                                "x" + std::to_string(m.cols()) + ", expected " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  return *idx;
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("ModelConfig: " + why); };
  if (image_size < 1 || patch_size < 1 || channels < 1) fail("sizes must be positive");
  if (image_size % patch_size != 0) fail("image_size must be a multiple of patch_size");
  if (num_heads < 1 || head_dim < 1) fail("num_heads and head_dim must be positive");
  if (embed_dim != num_heads * head_dim) fail("embed_dim must equal num_heads * head_dim");
  if (num_blocks < 1) fail("num_blocks must be >= 1");
  if (ffn_hidden < 1) fail("ffn_hidden must be positive");
  if (num_classes < 2) fail("num_classes must be >= 2");
}

std::pair<SegmentationTransformer, ParamStore> SegmentationTransformer::build(
    const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, stream_tag("init")));
  const int d = config.embed_dim;
  ParamStore store;
  store.add("embed.weight", Group::Embed, -1, fan_in_weight(config.patch_dim(), d, rng));
  store.add("embed.bias", Group::Embed, -1, Matrix::Zero(1, d));
  store.add("embed.pos", Group::Embed, -1,
            uniform(config.num_patches(), d, 1.0 / std::sqrt(static_cast<double>(d)), rng));
  for (int l = 0; l < config.num_blocks; ++l) {
    store.add(block_name(l, "q.weight"), Group::Q, l, fan_in_weight(d, d, rng));
    store.add(block_name(l, "q.bias"), Group::Q, l, Matrix::Zero(1, d));
    store.add(block_name(l, "k.weight"), Group::K, l, fan_in_weight(d, d, rng));
    store.add(block_name(l, "k.bias"), Group::K, l, Matrix::Zero(1, d));
    store.add(block_name(l, "v.weight"), Group::V, l, fan_in_weight(d, d, rng));
    store.add(block_name(l, "v.bias"), Group::V, l, Matrix::Zero(1, d));
    store.add(block_name(l, "attn_out.weight"), Group::V, l, fan_in_weight(d, d, rng));
    store.add(block_name(l, "attn_out.bias"), Group::V, l, Matrix::Zero(1, d));
    store.add(block_name(l, "ffn1.weight"), Group::FFN, l,
              fan_in_weight(d, config.ffn_hidden, rng));
    store.add(block_name(l, "ffn1.bias"), Group::FFN, l, Matrix::Zero(1, config.ffn_hidden));
    store.add(block_name(l, "ffn2.weight"), Group::FFN, l,
              fan_in_weight(config.ffn_hidden, d, rng));
    store.add(block_name(l, "ffn2.bias"), Group::FFN, l, Matrix::Zero(1, d));
  }
  store.add("decoder.weight", Group::Decoder, -1, fan_in_weight(d, config.num_classes, rng));
  store.add("decoder.bias", Group::Decoder, -1, Matrix::Zero(1, config.num_classes));

  SegmentationTransformer model(config);
  model.index(store);
  return {std::move(model), std::move(store)};
}

SegmentationTransformer SegmentationTransformer::bind(const ModelConfig& config,
                                                      const ParamStore& store) {
  config.validate();
  SegmentationTransformer model(config);
  model.index(store);
  std::size_t expected = 3 + 12 * static_cast<std::size_t>(config.num_blocks) + 2;
  if (store.size() != expected) {
    throw std::invalid_argument("parameter store has " + std::to_string(store.size()) +
                                " entries, model expects " + std::to_string(expected));
  }
  return model;
}

void SegmentationTransformer::index(const ParamStore& store) {
  const ModelConfig& c = config_;
  const int d = c.embed_dim;
  embed_w_ = require(store, "embed.weight", c.patch_dim(), d);
  embed_b_ = require(store, "embed.bias", 1, d);
  pos_ = require(store, "embed.pos", c.num_patches(), d);
  blocks_.clear();
  for (int l = 0; l < c.num_blocks; ++l) {
    BlockParams b{};
    b.wq = require(store, block_name(l, "q.weight"), d, d);
    b.bq = require(store, block_name(l, "q.bias"), 1, d);
    b.wk = require(store, block_name(l, "k.weight"), d, d);
    b.bk = require(store, block_name(l, "k.bias"), 1, d);
    b.wv = require(store, block_name(l, "v.weight"), d, d);
    b.bv = require(store, block_name(l, "v.bias"), 1, d);
    b.wo = require(store, block_name(l, "attn_out.weight"), d, d);
    b.bo = require(store, block_name(l, "attn_out.bias"), 1, d);
    b.w1 = require(store, block_name(l, "ffn1.weight"), d, c.ffn_hidden);
    b.b1 = require(store, block_name(l, "ffn1.bias"), 1, c.ffn_hidden);
    b.w2 = require(store, block_name(l, "ffn2.weight"), c.ffn_hidden, d);
    b.b2 = require(store, block_name(l, "ffn2.bias"), 1, d);
    blocks_.push_back(b);
  }
  dec_w_ = require(store, "decoder.weight", d, c.num_classes);
  dec_b_ = require(store, "decoder.bias", 1, c.num_classes);
}

void SegmentationTransformer::reset_decoder(ParamStore& store, int num_classes,
                                            std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  Rng rng(derive_seed(seed, stream_tag("decoder-init")));
  store[dec_w_].value = fan_in_weight(config_.embed_dim, num_classes, rng);
  store[dec_b_].value = Matrix::Zero(1, num_classes);
  config_.num_classes = num_classes;
}

Matrix SegmentationTransformer::patchify(const Matrix& image) const {
  const ModelConfig& c = config_;
  const int side = c.image_size;
  if (image.rows() != c.channels || image.cols() != side * side) {
    throw std::invalid_argument("image shape " + std::to_string(image.rows()) + "x" +
                                std::to_string(image.cols()) + " does not match model config");
  }
  const int p = c.patch_size;
  const int g = c.grid();
  Matrix tokens(c.num_patches(), c.patch_dim());
  for (int py = 0; py < g; ++py) {
    for (int px = 0; px < g; ++px) {
      const int row = py * g + px;
      int col = 0;
      for (int ch = 0; ch < c.channels; ++ch) {
        for (int dy = 0; dy < p; ++dy) {
          for (int dx = 0; dx < p; ++dx) {
            tokens(row, col++) = image(ch, (py * p + dy) * side + (px * p + dx));
          }
        }
      }
    }
  }
  return tokens;
}

Var SegmentationTransformer::embed(Tape& tape, const ParamStore& store,
                                   const Matrix& image) const {
  Var tokens = tape.constant(patchify(image));
  return add(add_row(matmul(tokens, tape.parameter(store, embed_w_)),
                     tape.parameter(store, embed_b_)),
             tape.parameter(store, pos_));
}

Var SegmentationTransformer::encode(Tape& tape, const ParamStore& store, Var x,
                                    ForwardTrace* trace) const {
  const ModelConfig& c = config_;
  if (tape.value(x).cols() != c.embed_dim) throw std::invalid_argument("encode: width mismatch");
  auto P = [&](std::size_t i) { return tape.parameter(store, i); };
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(c.head_dim));
  std::vector<Var> heads(static_cast<std::size_t>(c.num_heads));
  for (const BlockParams& b : blocks_) {
    Var q = add_row(matmul(x, P(b.wq)), P(b.bq));
    Var k = add_row(matmul(x, P(b.wk)), P(b.bk));
    Var v = add_row(matmul(x, P(b.wv)), P(b.bv));
    for (int h = 0; h < c.num_heads; ++h) {
      const Eigen::Index at = static_cast<Eigen::Index>(h) * c.head_dim;
      Var qh = col_block(q, at, c.head_dim);
      Var kh = col_block(k, at, c.head_dim);
      Var vh = col_block(v, at, c.head_dim);
      Var attn = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt_dh));
      if (trace != nullptr) trace->attention.push_back(tape.value(attn));
      heads[static_cast<std::size_t>(h)] = matmul(attn, vh);
    }
    Var mha = add_row(matmul(hconcat(heads), P(b.wo)), P(b.bo));
    x = layer_norm_rows(add(x, mha));
    Var hidden = relu(add_row(matmul(x, P(b.w1)), P(b.b1)));
    Var ffn = add_row(matmul(hidden, P(b.w2)), P(b.b2));
    x = layer_norm_rows(add(x, ffn));
  }
  return x;
}

Var SegmentationTransformer::features(Tape& tape, const ParamStore& store, const Matrix& image,
                                      ForwardTrace* trace) const {
  return encode(tape, store, embed(tape, store, image), trace);
}

Var SegmentationTransformer::decode(Tape& tape, const ParamStore& store, Var features) const {
  return add_row(matmul(features, tape.parameter(store, dec_w_)), tape.parameter(store, dec_b_));
}

Var SegmentationTransformer::forward(Tape& tape, const ParamStore& store, const Matrix& image,
                                     ForwardTrace* trace) const {
  Var out = decode(tape, store, features(tape, store, image, trace));
  if (!tape.value(out).allFinite()) throw NumericalError("non-finite logits in forward pass");
  return out;
}

Matrix SegmentationTransformer::logits(const ParamStore& store, const Matrix& image) const {
  Tape tape;
  return tape.value(forward(tape, store, image));
}

Var loss_ce(Var logits, std::span<const int> labels) { return cross_entropy(logits, labels); }

}  // namespace ftune::nn
