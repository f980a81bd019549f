#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "jtner/datagen.hpp"
#include "jtner/errors.hpp"

using namespace jtner;

namespace {

std::string joined(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

int count_store(const std::vector<LabeledQuery>& corpus) {
    return static_cast<int>(std::count_if(corpus.begin(), corpus.end(),
                                          [](const LabeledQuery& q) { return q.is_store_lookup; }));
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("tokenize: lowercasing, whitespace runs, surrounding punctuation") {
    CHECK(tokenize("Orange Target store") == std::vector<std::string>{"orange", "target", "store"});
    CHECK(tokenize("  ") == std::vector<std::string>{});
    CHECK(tokenize("pickup, my order!") == std::vector<std::string>{"pickup", "my", "order"});
    CHECK(tokenize("\tadd   milk\nto cart ") == std::vector<std::string>{"add", "milk", "to", "cart"});
    CHECK(tokenize("...") == std::vector<std::string>{});
}

TEST_CASE("tokenize output is a fixpoint") {
    for (const char* text : {"Pickup my ORDER at orange store!", "a  b\tc", "don't stop-believing"}) {
        const auto once = tokenize(text);
        CHECK(tokenize(joined(once)) == once);
    }
}

TEST_CASE("generate_corpus: class balance is exact for even splits") {
    GenConfig cfg;
    cfg.n_queries = 100;
    cfg.store_fraction = 0.5;
    cfg.seed = 1;
    const auto corpus = generate_corpus(cfg);
    REQUIRE(corpus.size() == 100);
    CHECK(count_store(corpus) == 50);

    cfg.n_queries = 101;
    cfg.store_fraction = 0.3;
    const int n_store = count_store(generate_corpus(cfg));
    CHECK(std::abs(n_store - 30) <= 1);
}

TEST_CASE("generate_corpus: every record satisfies its invariants") {
    GenConfig cfg;
    cfg.n_queries = 500;
    cfg.seed = 3;
    for (const auto& q : generate_corpus(cfg)) {
        q.validate();
        const bool has_span =
            std::any_of(q.tags.begin(), q.tags.end(), [](Tag t) { return t != Tag::O; });
        CHECK(q.is_store_lookup == has_span);
        CHECK(q.tokens.size() <= 16);
    }
}

TEST_CASE("generate_corpus: the two exemplar ambiguity queries appear with correct labels") {
    GenConfig cfg;
    cfg.n_queries = 4000;
    cfg.seed = 1;
    const auto corpus = generate_corpus(cfg);

    bool saw_store_orange = false, saw_fruit_orange = false;
    for (const auto& q : corpus) {
        if (joined(q.tokens) == "pickup my order at orange store") {
            saw_store_orange = true;
            CHECK(q.tags == std::vector<Tag>{Tag::O, Tag::O, Tag::O, Tag::O, Tag::BStore, Tag::O});
            CHECK(q.is_store_lookup);
        }
        if (joined(q.tokens) == "buy orange at target") {
            saw_fruit_orange = true;
            CHECK(q.tags == std::vector<Tag>(4, Tag::O));
            CHECK_FALSE(q.is_store_lookup);
        }
    }
    CHECK(saw_store_orange);
    CHECK(saw_fruit_orange);
}

TEST_CASE("generate_corpus: ambiguity guarantee at n >= 200") {
    GenConfig cfg;
    cfg.n_queries = 200;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        cfg.seed = seed;
        const auto corpus = generate_corpus(cfg);
        std::set<std::string> in_span, outside;
        for (const auto& q : corpus) {
            for (std::size_t i = 0; i < q.tokens.size(); ++i) {
                (q.tags[i] != Tag::O ? in_span : outside).insert(q.tokens[i]);
            }
        }
        bool overlap = false;
        for (const auto& t : in_span) {
            if (outside.count(t)) overlap = true;
        }
        CHECK(overlap);
    }
}

TEST_CASE("generate_corpus: deterministic per seed, different across seeds") {
    GenConfig cfg;
    cfg.n_queries = 50;
    cfg.seed = 9;
    CHECK(generate_corpus(cfg) == generate_corpus(cfg));
    for (std::uint64_t other : {10ULL, 11ULL, 12ULL}) {
        GenConfig cfg2 = cfg;
        cfg2.seed = other;
        CHECK(generate_corpus(cfg) != generate_corpus(cfg2));
    }
}

TEST_CASE("generate_corpus validates its config") {
    GenConfig cfg;
    cfg.n_queries = 0;
    CHECK_THROWS_AS(generate_corpus(cfg), ContractError);
    cfg.n_queries = 10;
    cfg.store_fraction = 1.5;
    CHECK_THROWS_AS(generate_corpus(cfg), ContractError);
}

TEST_CASE("split: sizes, determinism and stratification") {
    GenConfig cfg;
    cfg.n_queries = 100;
    cfg.seed = 4;
    const auto corpus = generate_corpus(cfg);
    const auto [train, test] = split(corpus, 0.2, 7);
    CHECK(train.size() == 80);
    CHECK(test.size() == 20);
    const auto [train2, test2] = split(corpus, 0.2, 7);
    CHECK(train == train2);
    CHECK(test == test2);

    // 60/40 class mix -> 12/8 in a 20% test split, within one.
    GenConfig skew;
    skew.n_queries = 100;
    skew.store_fraction = 0.6;
    skew.seed = 5;
    const auto mixed = generate_corpus(skew);
    const auto [tr, te] = split(mixed, 0.2, 1);
    const int te_store = count_store(te);
    CHECK(std::abs(te_store - 12) <= 1);
    CHECK(std::abs(static_cast<int>(te.size()) - te_store - 8) <= 1);
}

TEST_CASE("split validates inputs") {
    const std::vector<LabeledQuery> one = {{{"a"}, {Tag::O}, false}};
    CHECK_THROWS_AS(split(one, 0.2, 1), ContractError);
    GenConfig cfg;
    cfg.n_queries = 10;
    const auto corpus = generate_corpus(cfg);
    CHECK_THROWS_AS(split(corpus, 0.0, 1), ContractError);
    CHECK_THROWS_AS(split(corpus, 1.0, 1), ContractError);
}

TEST_CASE("build_vocab: reserved ids and first-appearance order") {
    const std::vector<LabeledQuery> train = {{{"a", "b", "a"}, {Tag::O, Tag::O, Tag::O}, false}};
    const Vocabulary v = build_vocab(train);
    CHECK(v.size() == 4);
    CHECK(v.lookup("a") == 2);
    CHECK(v.lookup("b") == 3);
    CHECK(v.lookup("zzz") == Vocabulary::kUnkId);
    CHECK(v.id_to_token[0] == "<pad>");
    CHECK(v.id_to_token[1] == "<unk>");
    CHECK_THROWS_AS(build_vocab({}), ContractError);
}

TEST_CASE("dataset file round trip is exact") {
    GenConfig cfg;
    cfg.n_queries = 120;
    cfg.seed = 21;
    const auto corpus = generate_corpus(cfg);
    const std::string path = temp_path("jtner_test_corpus.jsonl");
    write_dataset(corpus, path);
    CHECK(read_dataset(path) == corpus);

    // Byte determinism: writing the same corpus twice gives identical files.
    const std::string path2 = temp_path("jtner_test_corpus2.jsonl");
    write_dataset(corpus, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("dataset reader rejects malformed records") {
    CHECK_THROWS_AS(parse_dataset_line("not json"), ContractError);
    CHECK_THROWS_AS(parse_dataset_line(R"({"tokens":["a"],"tags":["O","O"],"intent":0})"), ContractError);
    CHECK_THROWS_AS(parse_dataset_line(R"({"tokens":["a"],"tags":["I-STORE"],"intent":1})"), ContractError);
    CHECK_THROWS_AS(parse_dataset_line(R"({"tokens":["a"],"tags":["B-THING"],"intent":1})"), ContractError);
    CHECK_THROWS_AS(parse_dataset_line(R"({"tokens":["a"],"tags":["O"],"intent":7})"), ContractError);
    const LabeledQuery q = parse_dataset_line(R"({"tokens":["orange","store"],"tags":["B-STORE","O"],"intent":1})");
    CHECK(q.tokens.size() == 2);
    CHECK(q.tags[0] == Tag::BStore);
    CHECK(q.is_store_lookup);
}

TEST_CASE("lexicon: default is usable and json loader validates") {
    const Lexicon& lex = default_lexicon();
    CHECK(lex.ambiguous.size() >= 3);
    CHECK(lex.locations_only.size() >= 6);
    CHECK(lex.items_only.size() >= 6);
    CHECK_THROWS_AS(parse_lexicon_json("{}"), ContractError);
    CHECK_THROWS_AS(parse_lexicon_json("nope"), ContractError);
}
