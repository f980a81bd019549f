#include "jtner/encoder.hpp"

#include <cmath>
#include <random>

#include "jtner/errors.hpp"

namespace jtner {

void EncoderConfig::validate() const {
    if (vocab_size < 1) throw ContractError("vocab_size must be >= 1");
    if (d_model < 1 || n_heads < 1 || n_layers < 1 || d_ff < 1 || max_len < 1) {
        throw ContractError("all encoder dimensions must be >= 1");
    }
    if (d_model % n_heads != 0) {
        throw ContractError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                            std::to_string(n_heads));
    }
}

Tensor& ModelParams::at(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw ContractError("unknown parameter " + name);
    return it->second;
}

const Tensor& ModelParams::at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw ContractError("unknown parameter " + name);
    return it->second;
}

std::int64_t ModelParams::total_size() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : values) n += t.size();
    return n;
}

namespace {

Tensor glorot_uniform(std::mt19937_64& rng, int fan_in, int fan_out, std::vector<int> shape) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (double& v : t.data) v = dist(rng);
    return t;
}

std::string layer_key(int layer) { return "l" + std::to_string(layer); }
std::string head_key(int layer, int head) {
    return layer_key(layer) + ".attn.h" + std::to_string(head);
}

}  // namespace

ModelParams init_params(const EncoderConfig& cfg) {
    cfg.validate();
    const int d = cfg.d_model;
    const int dh = cfg.head_dim();
    std::mt19937_64 rng(cfg.seed);
    ModelParams p;

    // Weight matrices consume the RNG in a fixed order; biases and layer-norm
    // params are constant-initialized and draw nothing.
    p.values["emb.tok"] = glorot_uniform(rng, cfg.vocab_size, d, {cfg.vocab_size, d});
    p.values["emb.pos"] = glorot_uniform(rng, cfg.max_len, d, {cfg.max_len, d});
    for (int l = 0; l < cfg.n_layers; ++l) {
        for (int h = 0; h < cfg.n_heads; ++h) {
            const std::string hk = head_key(l, h);
            p.values[hk + ".wq"] = glorot_uniform(rng, d, dh, {d, dh});
            p.values[hk + ".wk"] = glorot_uniform(rng, d, dh, {d, dh});
            p.values[hk + ".wv"] = glorot_uniform(rng, d, dh, {d, dh});
            p.values[hk + ".wo"] = glorot_uniform(rng, dh, d, {dh, d});
            p.values[hk + ".bq"] = Tensor({dh});
            p.values[hk + ".bk"] = Tensor({dh});
            p.values[hk + ".bv"] = Tensor({dh});
        }
        const std::string lk = layer_key(l);
        p.values[lk + ".attn.bo"] = Tensor({d});
        p.values[lk + ".ln1.g"] = Tensor::full({d}, 1.0);
        p.values[lk + ".ln1.b"] = Tensor({d});
        p.values[lk + ".ffn.w1"] = glorot_uniform(rng, d, cfg.d_ff, {d, cfg.d_ff});
        p.values[lk + ".ffn.w2"] = glorot_uniform(rng, cfg.d_ff, d, {cfg.d_ff, d});
        p.values[lk + ".ffn.b1"] = Tensor({cfg.d_ff});
        p.values[lk + ".ffn.b2"] = Tensor({d});
        p.values[lk + ".ln2.g"] = Tensor::full({d}, 1.0);
        p.values[lk + ".ln2.b"] = Tensor({d});
    }
    p.values["ner.w"] = glorot_uniform(rng, d, kNumTags, {d, kNumTags});
    p.values["ner.b"] = Tensor({kNumTags});
    p.values["intent.w"] = glorot_uniform(rng, d, 1, {d, 1});
    p.values["intent.b"] = Tensor({1});

    for (auto& [name, t] : p.values) t.requires_grad = true;
    return p;
}

int ParamBinder::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const int id = tape_.param(params_.at(name), name);
    bound_[name] = id;
    return id;
}

int build_encoder(Tape& tape, ParamBinder& bind, const std::vector<int>& token_ids, const EncoderConfig& cfg,
                  EncoderTrace* trace) {
    cfg.validate();
    const int n = static_cast<int>(token_ids.size());
    if (n < 1) throw ContractError("cannot encode an empty query");
    if (n > cfg.max_len) {
        throw ContractError("query of " + std::to_string(n) + " tokens exceeds max_len " +
                            std::to_string(cfg.max_len));
    }
    for (int id : token_ids) {
        if (id < 0 || id >= cfg.vocab_size) {
            throw IndexError("token id " + std::to_string(id) + " out of range [0," +
                             std::to_string(cfg.vocab_size) + ")");
        }
    }
    if (trace) trace->attention.assign(static_cast<std::size_t>(cfg.n_layers), {});

    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
    int x = tape.add(tape.embedding_lookup(bind("emb.tok"), token_ids),
                     tape.slice_rows(bind("emb.pos"), 0, n));
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string lk = layer_key(l);
        int attn_sum = -1;
        for (int h = 0; h < cfg.n_heads; ++h) {
            const std::string hk = head_key(l, h);
            const int q = tape.add_row_vec(tape.matmul(x, bind(hk + ".wq")), bind(hk + ".bq"));
            const int k = tape.add_row_vec(tape.matmul(x, bind(hk + ".wk")), bind(hk + ".bk"));
            const int v = tape.add_row_vec(tape.matmul(x, bind(hk + ".wv")), bind(hk + ".bv"));
            const int scores = tape.scale(tape.matmul(q, tape.transpose(k)), attn_scale);
            const int weights = tape.softmax_rows(scores);
            if (trace) trace->attention[static_cast<std::size_t>(l)].push_back(weights);
            const int ctx = tape.matmul(weights, v);
            const int proj = tape.matmul(ctx, bind(hk + ".wo"));
            attn_sum = (attn_sum < 0) ? proj : tape.add(attn_sum, proj);
        }
        const int attn = tape.add_row_vec(attn_sum, bind(lk + ".attn.bo"));
        x = tape.layer_norm(tape.add(x, attn), bind(lk + ".ln1.g"), bind(lk + ".ln1.b"));
        const int ff1 = tape.gelu(tape.add_row_vec(tape.matmul(x, bind(lk + ".ffn.w1")), bind(lk + ".ffn.b1")));
        const int ff2 = tape.add_row_vec(tape.matmul(ff1, bind(lk + ".ffn.w2")), bind(lk + ".ffn.b2"));
        x = tape.layer_norm(tape.add(x, ff2), bind(lk + ".ln2.g"), bind(lk + ".ln2.b"));
    }
    return x;
}

Tensor encode(const std::vector<int>& token_ids, ModelParams& params, const EncoderConfig& cfg) {
    Tape tape;
    ParamBinder bind(tape, params);
    return tape.value(build_encoder(tape, bind, token_ids, cfg));
}

Tensor attention_weights(const std::vector<int>& token_ids, ModelParams& params, const EncoderConfig& cfg,
                         int layer, int head) {
    if (layer < 0 || layer >= cfg.n_layers) {
        throw IndexError("layer " + std::to_string(layer) + " out of range [0," + std::to_string(cfg.n_layers) + ")");
    }
    if (head < 0 || head >= cfg.n_heads) {
        throw IndexError("head " + std::to_string(head) + " out of range [0," + std::to_string(cfg.n_heads) + ")");
    }
    Tape tape;
    ParamBinder bind(tape, params);
    EncoderTrace trace;
    build_encoder(tape, bind, token_ids, cfg, &trace);
    return tape.value(trace.attention[static_cast<std::size_t>(layer)][static_cast<std::size_t>(head)]);
}

}  // namespace jtner
