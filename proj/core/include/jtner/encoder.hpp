#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "jtner/tape.hpp"
#include "jtner/tensor.hpp"

namespace jtner {

/// Small bidirectional transformer encoder trained from scratch.
///
/// Architecture (fixed; the parameter set is a pure function of this config):
///   - learned token embeddings  "emb.tok"  [vocab_size, d_model]
///   - learned position embeddings "emb.pos" [max_len, d_model]
///   - n_layers post-norm blocks, each:
///       per head h (head_dim = d_model / n_heads):
///         "l{i}.attn.h{h}.wq" [d_model, head_dim]  + "...bq" [head_dim]
///         "l{i}.attn.h{h}.wk" / "...bk", "...wv" / "...bv"  (same shapes)
///         "l{i}.attn.h{h}.wo" [head_dim, d_model]
///       "l{i}.attn.bo" [d_model]
///       "l{i}.ln1.g" / "l{i}.ln1.b" [d_model]
///       "l{i}.ffn.w1" [d_model, d_ff] + "l{i}.ffn.b1" [d_ff]   (gelu)
///       "l{i}.ffn.w2" [d_ff, d_model] + "l{i}.ffn.b2" [d_model]
///       "l{i}.ln2.g" / "l{i}.ln2.b" [d_model]
///   - task heads: "ner.w" [d_model, n_tags] + "ner.b" [n_tags],
///                 "intent.w" [d_model, 1] + "intent.b" [1]
///
/// Attention is unmasked (every token attends to every other, both
/// directions). Weight matrices use uniform init with bound
/// sqrt(6 / (fan_in + fan_out)); all biases start at 0, layer-norm gains
/// at 1. No dropout.
struct EncoderConfig {
    int vocab_size = 0;  // filled from the vocabulary by the trainer
    int d_model = 32;
    int n_heads = 2;
    int n_layers = 2;
    int d_ff = 64;
    int max_len = 16;
    std::uint64_t seed = 1;

    int head_dim() const { return d_model / n_heads; }
    void validate() const;  // throws ContractError
};

/// All learnable weights, addressable by name. std::map keeps iteration in a
/// canonical order for serialization and optimizer updates.
struct ModelParams {
    std::map<std::string, Tensor> values;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return values.count(name) != 0; }
    std::int64_t total_size() const;
};

constexpr int kNumTags = 3;  // O, B-STORE, I-STORE

/// Deterministic init for the given config and seed; includes both task
/// heads. Every tensor has requires_grad set.
ModelParams init_params(const EncoderConfig& cfg);

/// Per-(layer, head) attention softmax node ids, filled during graph build.
struct EncoderTrace {
    std::vector<std::vector<int>> attention;  // [layer][head] -> tape node
};

/// Binds parameters to a tape lazily, one leaf per name per tape, so a
/// parameter used by several queries in one batch accumulates a single
/// gradient.
class ParamBinder {
public:
    ParamBinder(Tape& tape, ModelParams& params) : tape_(tape), params_(params) {}
    int operator()(const std::string& name);

private:
    Tape& tape_;
    ModelParams& params_;
    std::map<std::string, int> bound_;
};

/// Appends the encoder forward graph for one query; returns the node holding
/// the [n, d_model] contextual vectors.
int build_encoder(Tape& tape, ParamBinder& bind, const std::vector<int>& token_ids, const EncoderConfig& cfg,
                  EncoderTrace* trace = nullptr);

/// Convenience forward pass on a throwaway tape (inference).
Tensor encode(const std::vector<int>& token_ids, ModelParams& params, const EncoderConfig& cfg);

/// Attention distribution of one layer/head for a query; rows sum to 1.
Tensor attention_weights(const std::vector<int>& token_ids, ModelParams& params, const EncoderConfig& cfg,
                         int layer, int head);

}  // namespace jtner
