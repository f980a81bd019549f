#include <doctest.h>

#include <cmath>

#include "jtner/encoder.hpp"
#include "jtner/errors.hpp"
#include "jtner/heads.hpp"
#include "jtner/tape.hpp"

using namespace jtner;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.vocab_size = 50;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.d_ff = 16;
    cfg.max_len = 8;
    cfg.seed = 42;
    return cfg;
}

// Parameter count from the architecture description, assembled by hand.
std::int64_t expected_param_count(const EncoderConfig& c) {
    const std::int64_t d = c.d_model, dh = c.d_model / c.n_heads, f = c.d_ff;
    const std::int64_t embeddings = static_cast<std::int64_t>(c.vocab_size) * d + c.max_len * d;
    const std::int64_t per_head = 3 * (d * dh + dh) + dh * d;  // q/k/v with bias + output slice
    const std::int64_t attn = c.n_heads * per_head + d;        // + shared output bias
    const std::int64_t ffn = d * f + f + f * d + d;
    const std::int64_t norms = 2 * (2 * d);
    const std::int64_t per_layer = attn + ffn + norms;
    const std::int64_t heads = (d * 3 + 3) + (d + 1);
    return embeddings + c.n_layers * per_layer + heads;
}

}  // namespace

TEST_CASE("config validation") {
    EncoderConfig cfg = tiny_config();
    cfg.d_model = 9;  // not divisible by 2 heads
    CHECK_THROWS_AS(cfg.validate(), ContractError);
    cfg = tiny_config();
    cfg.max_len = 0;
    CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("init_params is deterministic in the seed") {
    const EncoderConfig cfg = tiny_config();
    const ModelParams a = init_params(cfg);
    const ModelParams b = init_params(cfg);
    REQUIRE(a.values.size() == b.values.size());
    for (const auto& [name, t] : a.values) {
        CHECK(t.data == b.values.at(name).data);  // bit-identical
    }

    EncoderConfig other = cfg;
    other.seed = cfg.seed + 1;
    const ModelParams c = init_params(other);
    bool any_diff = false;
    for (const auto& [name, t] : a.values) {
        if (t.data != c.values.at(name).data) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("parameter count matches the hand formula") {
    const EncoderConfig cfg = tiny_config();
    const ModelParams p = init_params(cfg);
    CHECK(p.total_size() == expected_param_count(cfg));
    CHECK(p.total_size() == 1100);  // frozen for this exact config
}

TEST_CASE("encode shape contract and determinism") {
    EncoderConfig cfg = tiny_config();
    cfg.d_model = 16;
    cfg.d_ff = 32;
    ModelParams params = init_params(cfg);
    const std::vector<int> ids = {4, 9, 2, 7, 1};
    const Tensor h1 = encode(ids, params, cfg);
    CHECK(h1.shape == std::vector<int>{5, 16});
    const Tensor h2 = encode(ids, params, cfg);
    CHECK(h1.data == h2.data);  // bit-identical
}

TEST_CASE("single-token query is finite with the right shape") {
    const EncoderConfig cfg = tiny_config();
    ModelParams params = init_params(cfg);
    const Tensor h = encode({3}, params, cfg);
    CHECK(h.shape == std::vector<int>{1, 8});
    CHECK(h.all_finite());
}

TEST_CASE("encode validates lengths and token ids") {
    const EncoderConfig cfg = tiny_config();
    ModelParams params = init_params(cfg);
    CHECK_THROWS_AS(encode(std::vector<int>(9, 1), params, cfg), ContractError);  // max_len 8
    CHECK_THROWS_AS(encode({50}, params, cfg), IndexError);
    CHECK_THROWS_AS(encode({}, params, cfg), ContractError);
}

TEST_CASE("zeroed positions make a one-layer encoder permutation-equivariant") {
    EncoderConfig cfg = tiny_config();
    cfg.n_layers = 1;
    ModelParams params = init_params(cfg);
    for (double& v : params.at("emb.pos").data) v = 0.0;

    const std::vector<int> ids = {5, 11, 23};
    const std::vector<int> permuted = {23, 5, 11};  // row i of permuted input = row perm[i] of original
    const std::vector<int> perm = {2, 0, 1};
    const Tensor h = encode(ids, params, cfg);
    const Tensor hp = encode(permuted, params, cfg);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < cfg.d_model; ++j) {
            CHECK(hp.at(i, j) == doctest::Approx(h.at(perm[static_cast<std::size_t>(i)], j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("bidirectionality: the last token changes the first token's encoding") {
    const EncoderConfig cfg = tiny_config();
    ModelParams params = init_params(cfg);
    const Tensor a = encode({1, 2, 3, 4}, params, cfg);
    const Tensor b = encode({1, 2, 3, 9}, params, cfg);
    double max_diff = 0.0;
    for (int j = 0; j < cfg.d_model; ++j) max_diff = std::max(max_diff, std::abs(a.at(0, j) - b.at(0, j)));
    CHECK(max_diff > 1e-9);
}

TEST_CASE("attention rows are distributions; single token attends to itself") {
    const EncoderConfig cfg = tiny_config();
    ModelParams params = init_params(cfg);
    for (int layer = 0; layer < cfg.n_layers; ++layer) {
        for (int head = 0; head < cfg.n_heads; ++head) {
            const Tensor w = attention_weights({4, 8, 15, 16}, params, cfg, layer, head);
            REQUIRE(w.shape == std::vector<int>{4, 4});
            for (int r = 0; r < 4; ++r) {
                double sum = 0.0;
                for (int c = 0; c < 4; ++c) sum += w.at(r, c);
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
    const Tensor single = attention_weights({4}, params, cfg, 0, 0);
    CHECK(single.shape == std::vector<int>{1, 1});
    CHECK(single.data[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zeroed query/key projections give uniform attention") {
    const EncoderConfig cfg = tiny_config();
    ModelParams params = init_params(cfg);
    for (const char* name : {"l0.attn.h0.wq", "l0.attn.h0.wk"}) {
        for (double& v : params.at(name).data) v = 0.0;
    }
    const Tensor w = attention_weights({1, 2, 3}, params, cfg, 0, 0);
    for (double v : w.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("attention_weights validates layer and head indices") {
    const EncoderConfig cfg = tiny_config();
    ModelParams params = init_params(cfg);
    CHECK_THROWS_AS(attention_weights({1}, params, cfg, 1, 0), IndexError);
    CHECK_THROWS_AS(attention_weights({1}, params, cfg, 0, 2), IndexError);
}

TEST_CASE("after backward every parameter has a gradient slot") {
    const EncoderConfig cfg = tiny_config();
    ModelParams params = init_params(cfg);
    Tape tape;
    ParamBinder bind(tape, params);
    const int h = build_encoder(tape, bind, {1, 2, 3, 4}, cfg);
    const int ner = build_ner_head(tape, bind, h);
    const int intent = build_intent_head(tape, bind, h);
    const int loss = tape.add(tape.cross_entropy(ner, {0, 1, 2, 0}),
                              tape.logistic_loss(intent, {1, 1, 1, 1}));
    const GradMap grads = tape.backward(loss);
    for (const auto& [name, t] : params.values) {
        INFO("param ", name);
        CHECK(grads.count(name) == 1);
        REQUIRE(t.grad.has_value());
        CHECK(t.grad->size() == t.data.size());
    }
}
