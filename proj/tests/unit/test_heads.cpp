#include <doctest.h>

#include <random>

#include "jtner/encoder.hpp"
#include "jtner/errors.hpp"
#include "jtner/heads.hpp"
#include "oracles.hpp"

using namespace jtner;

namespace {

ModelParams head_only_params(int d_model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    ModelParams p;
    p.values["ner.w"] = Tensor({d_model, kNumTags});
    p.values["ner.b"] = Tensor({kNumTags});
    p.values["intent.w"] = Tensor({d_model, 1});
    p.values["intent.b"] = Tensor({1});
    for (auto& [name, t] : p.values) {
        for (double& v : t.data) v = dist(rng);
        t.requires_grad = true;
    }
    return p;
}

Tensor random_hidden(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor h({n, d});
    for (double& v : h.data) v = dist(rng);
    return h;
}

std::vector<Tag> tags_of(const std::initializer_list<Tag>& l) { return l; }

}  // namespace

TEST_CASE("tag set ordering and validity") {
    CHECK(tag_names() == std::vector<std::string>{"O", "B-STORE", "I-STORE"});
    CHECK(static_cast<int>(Tag::O) == 0);
    CHECK(tag_from_name("I-STORE") == Tag::IStore);
    CHECK_THROWS_AS(tag_from_name("B-PRODUCT"), ContractError);
    CHECK(is_valid_bio(tags_of({Tag::BStore, Tag::IStore, Tag::O})));
    CHECK_FALSE(is_valid_bio(tags_of({Tag::O, Tag::IStore})));
    CHECK_FALSE(is_valid_bio(tags_of({Tag::IStore})));
}

TEST_CASE("ner_logits: shape, zero case and dot-product oracle") {
    ModelParams params = head_only_params(6, 9);
    const Tensor h = random_hidden(4, 6, 9);
    const Tensor logits = ner_logits(h, params);
    REQUIRE(logits.shape == std::vector<int>{4, kNumTags});

    const Tensor& w = params.at("ner.w");
    const Tensor& b = params.at("ner.b");
    auto expect = oracle::matmul(h.data, 4, 6, w.data, kNumTags);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < kNumTags; ++c) {
            const double v = expect[static_cast<std::size_t>(r) * kNumTags + c] + b.data[static_cast<std::size_t>(c)];
            CHECK(logits.at(r, c) == v);  // exact: same accumulation order
        }

    ModelParams zero = head_only_params(6, 9);
    for (double& v : zero.at("ner.w").data) v = 0.0;
    for (double& v : zero.at("ner.b").data) v = 0.0;
    const Tensor z = ner_logits(Tensor({2, 6}), zero);
    for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("intent_scores: shape, bias-only case and per-token oracle") {
    ModelParams params = head_only_params(5, 31);
    const Tensor h = random_hidden(3, 5, 4);
    const Tensor scores = intent_scores(h, params);
    REQUIRE(scores.shape == std::vector<int>{3});

    const Tensor& w = params.at("intent.w");
    const double b = params.at("intent.b").data[0];
    for (int r = 0; r < 3; ++r) {
        double acc = 0.0;
        for (int j = 0; j < 5; ++j) acc += h.at(r, j) * w.data[static_cast<std::size_t>(j)];
        CHECK(scores.data[static_cast<std::size_t>(r)] == acc + b);
    }

    ModelParams biased = head_only_params(5, 31);
    for (double& v : biased.at("intent.w").data) v = 0.0;
    biased.at("intent.b").data[0] = -1.0;
    const Tensor s = intent_scores(Tensor({3, 5}), biased);
    CHECK(s.data == std::vector<double>{-1.0, -1.0, -1.0});
}

TEST_CASE("expand_intent_labels: shared labels") {
    CHECK(expand_intent_labels(true, 3) == std::vector<int>{1, 1, 1});
    CHECK(expand_intent_labels(false, 2) == std::vector<int>{0, 0});
    CHECK(expand_intent_labels(true, 1) == std::vector<int>{1});
    CHECK_THROWS_AS(expand_intent_labels(true, 0), ContractError);
    for (int n : {1, 5, 17}) {
        for (bool flag : {false, true}) {
            const auto labels = expand_intent_labels(flag, n);
            for (int v : labels) CHECK(v == labels[0]);
        }
    }
}

TEST_CASE("predict_tags: dominant logits, ties, and row-scan oracle") {
    const Tensor dominant({3, 3}, {5, 1, 1, 1, 5, 1, 1, 1, 5});
    CHECK(predict_tags(dominant) == tags_of({Tag::O, Tag::BStore, Tag::IStore}));

    CHECK(predict_tags(Tensor::full({2, 3}, 0.7)) == tags_of({Tag::O, Tag::O}));  // ties break toward O

    const Tensor random_logits = random_hidden(5, 3, 2);
    const auto got = predict_tags(random_logits);
    for (int r = 0; r < 5; ++r) {
        int best = 0;
        for (int c = 1; c < 3; ++c)
            if (random_logits.at(r, c) > random_logits.at(r, best)) best = c;
        CHECK(static_cast<int>(got[static_cast<std::size_t>(r)]) == best);
    }
}

TEST_CASE("predict_tags is shift invariant per row") {
    const Tensor logits = random_hidden(6, 3, 12);
    const auto base = predict_tags(logits);
    for (double c : {-50.0, 3.25, 1000.0}) {
        Tensor shifted = logits;
        for (double& v : shifted.data) v += c;
        CHECK(predict_tags(shifted) == base);
    }
}

TEST_CASE("repair_bio rewrites orphan continuations") {
    CHECK(repair_bio(tags_of({Tag::O, Tag::IStore})) == tags_of({Tag::O, Tag::BStore}));
    CHECK(repair_bio(tags_of({Tag::BStore, Tag::IStore, Tag::O})) == tags_of({Tag::BStore, Tag::IStore, Tag::O}));
    CHECK(repair_bio(tags_of({Tag::IStore, Tag::IStore})) == tags_of({Tag::BStore, Tag::IStore}));
}

TEST_CASE("repair_bio properties: idempotent, validity, STORE set preserved") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Tag> tags;
        const int n = 1 + static_cast<int>(rng() % 7);
        for (int i = 0; i < n; ++i) tags.push_back(static_cast<Tag>(rng() % 3));
        const auto fixed = repair_bio(tags);
        CHECK(is_valid_bio(fixed));
        CHECK(repair_bio(fixed) == fixed);
        for (int i = 0; i < n; ++i) {
            const bool was_store = tags[static_cast<std::size_t>(i)] != Tag::O;
            const bool is_store = fixed[static_cast<std::size_t>(i)] != Tag::O;
            CHECK(was_store == is_store);
        }
    }
}

TEST_CASE("query_intent: mean with a strict threshold") {
    const QueryIntent hi = query_intent(Tensor({3}, {2.0, 1.0, 3.0}));
    CHECK(hi.is_store_lookup);
    CHECK(hi.mean_score == doctest::Approx(2.0));

    const QueryIntent lo = query_intent(Tensor({2}, {-1.0, -1.0}));
    CHECK_FALSE(lo.is_store_lookup);
    CHECK(lo.mean_score == doctest::Approx(-1.0));

    const QueryIntent edge = query_intent(Tensor({2}, {1.0, -1.0}));
    CHECK_FALSE(edge.is_store_lookup);  // strictly greater than zero
    CHECK(edge.mean_score == doctest::Approx(0.0));
}
