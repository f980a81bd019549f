#include "jtner/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "jtner/errors.hpp"
#include "lexicon_data.hpp"

namespace jtner {

using nlohmann::json;

void LabeledQuery::validate() const {
    if (tokens.empty()) throw ContractError("query has no tokens");
    if (tokens.size() != tags.size()) {
        throw ContractError("query has " + std::to_string(tokens.size()) + " tokens but " +
                            std::to_string(tags.size()) + " tags");
    }
    if (!is_valid_bio(tags)) throw ContractError("invalid BIO tag sequence");
}

void GenConfig::validate() const {
    if (n_queries < 1) throw ContractError("n_queries must be >= 1");
    if (store_fraction < 0.0 || store_fraction > 1.0) throw ContractError("store_fraction must be in [0,1]");
    if (ambiguity_rate < 0.0 || ambiguity_rate > 1.0) throw ContractError("ambiguity_rate must be in [0,1]");
}

void Lexicon::validate() const {
    if (ambiguous.empty() || locations_only.empty() || items_only.empty()) {
        throw ContractError("lexicon must provide ambiguous, locations_only and items_only phrases");
    }
}

Lexicon parse_lexicon_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ContractError(std::string("bad lexicon JSON: ") + e.what());
    }
    Lexicon lex;
    try {
        lex.ambiguous = j.at("ambiguous").get<std::vector<std::string>>();
        lex.locations_only = j.at("locations_only").get<std::vector<std::string>>();
        lex.items_only = j.at("items_only").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ContractError(std::string("bad lexicon JSON: ") + e.what());
    }
    lex.validate();
    return lex;
}

const Lexicon& default_lexicon() {
    static const Lexicon lex = parse_lexicon_json(detail::kLexiconJson);
    return lex;
}

Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lexicon file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_lexicon_json(buf.str());
}

namespace {

// Store-lookup templates carry exactly one {LOC}; the rest of the tokens,
// including any {ITEM} fill, stay outside the span.
const std::vector<std::string> kStoreTemplates = {
    "pickup my order at {LOC} store",
    "{LOC} target store",
    "directions to the {LOC} store",
    "store hours for {LOC}",
    "is the {LOC} store open today",
    "find the target store in {LOC}",
    "pickup {ITEM} at the {LOC} store",
    "{LOC} store phone number",
};

const std::vector<std::string> kNonStoreTemplates = {
    "buy {ITEM} at target",
    "add {ITEM} to cart",
    "buy an {ITEM}",
    "how much does {ITEM} cost",
    "show me {ITEM} reviews",
    "order {ITEM} online",
    "is {ITEM} in stock",
    "{ITEM} price at target",
};

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

const std::string& pick(std::mt19937_64& rng, const std::vector<std::string>& pool) {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
}

LabeledQuery fill_template(std::mt19937_64& rng, const std::string& tmpl, bool is_store, bool ambiguous_fill,
                           const Lexicon& lex) {
    LabeledQuery q;
    q.is_store_lookup = is_store;
    for (const std::string& t : split_ws(tmpl)) {
        if (t == "{LOC}") {
            const auto& pool = ambiguous_fill ? lex.ambiguous : lex.locations_only;
            bool first = true;
            for (const std::string& w : split_ws(pick(rng, pool))) {
                q.tokens.push_back(w);
                q.tags.push_back(first ? Tag::BStore : Tag::IStore);
                first = false;
            }
        } else if (t == "{ITEM}") {
            // In a store template the item is a secondary fill and always
            // comes from the unambiguous pool; the ambiguity draw applies to
            // the query's primary fill.
            const auto& pool = (!is_store && ambiguous_fill) ? lex.ambiguous : lex.items_only;
            for (const std::string& w : split_ws(pick(rng, pool))) {
                q.tokens.push_back(w);
                q.tags.push_back(Tag::O);
            }
        } else {
            q.tokens.push_back(t);
            q.tags.push_back(Tag::O);
        }
    }
    return q;
}

}  // namespace

std::vector<LabeledQuery> generate_corpus(const GenConfig& cfg) { return generate_corpus(cfg, default_lexicon()); }

std::vector<LabeledQuery> generate_corpus(const GenConfig& cfg, const Lexicon& lexicon) {
    cfg.validate();
    lexicon.validate();
    std::mt19937_64 rng(cfg.seed);
    const int n_store = static_cast<int>(std::lround(cfg.n_queries * cfg.store_fraction));

    std::vector<LabeledQuery> corpus;
    corpus.reserve(static_cast<std::size_t>(cfg.n_queries));
    std::bernoulli_distribution ambiguous_draw(cfg.ambiguity_rate);
    std::uniform_int_distribution<std::size_t> store_tmpl(0, kStoreTemplates.size() - 1);
    std::uniform_int_distribution<std::size_t> other_tmpl(0, kNonStoreTemplates.size() - 1);
    for (int i = 0; i < cfg.n_queries; ++i) {
        const bool is_store = i < n_store;
        const std::string& tmpl =
            is_store ? kStoreTemplates[store_tmpl(rng)] : kNonStoreTemplates[other_tmpl(rng)];
        corpus.push_back(fill_template(rng, tmpl, is_store, ambiguous_draw(rng), lexicon));
    }
    std::shuffle(corpus.begin(), corpus.end(), rng);
    return corpus;
}

std::pair<std::vector<LabeledQuery>, std::vector<LabeledQuery>> split(const std::vector<LabeledQuery>& corpus,
                                                                      double test_fraction, std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) {
        throw ContractError("test_fraction must be in (0,1)");
    }
    if (corpus.size() < 2) throw ContractError("cannot split a corpus of fewer than 2 queries");

    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < corpus.size(); ++i) by_class[corpus[i].is_store_lookup ? 1 : 0].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<bool> in_test(corpus.size(), false);
    for (auto& idx : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < n_test && i < idx.size(); ++i) in_test[idx[i]] = true;
    }

    std::pair<std::vector<LabeledQuery>, std::vector<LabeledQuery>> out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        (in_test[i] ? out.second : out.first).push_back(corpus[i]);
    }
    return out;
}

int Vocabulary::lookup(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnkId : it->second;
}

std::vector<int> Vocabulary::lookup(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(lookup(t));
    return ids;
}

Vocabulary build_vocab(const std::vector<LabeledQuery>& train) {
    if (train.empty()) throw ContractError("cannot build a vocabulary from an empty corpus");
    Vocabulary v;
    v.id_to_token = {"<pad>", "<unk>"};
    v.token_to_id = {{"<pad>", Vocabulary::kPadId}, {"<unk>", Vocabulary::kUnkId}};
    for (const auto& q : train) {
        for (const auto& tok : q.tokens) {
            if (v.token_to_id.emplace(tok, v.size()).second) v.id_to_token.push_back(tok);
        }
    }
    return v;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&]() {
        std::size_t b = 0, e = cur.size();
        while (b < e && std::ispunct(static_cast<unsigned char>(cur[b]))) ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(cur[e - 1]))) --e;
        if (e > b) out.push_back(cur.substr(b, e - b));
        cur.clear();
    };
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            flush();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    flush();
    return out;
}

std::string dataset_line(const LabeledQuery& q) {
    json j;
    j["tokens"] = q.tokens;
    std::vector<std::string> tags;
    tags.reserve(q.tags.size());
    for (Tag t : q.tags) tags.push_back(tag_name(t));
    j["tags"] = tags;
    j["intent"] = q.is_store_lookup ? 1 : 0;
    return j.dump();
}

LabeledQuery parse_dataset_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ContractError(std::string("bad dataset line: ") + e.what());
    }
    LabeledQuery q;
    try {
        q.tokens = j.at("tokens").get<std::vector<std::string>>();
        for (const auto& name : j.at("tags").get<std::vector<std::string>>()) {
            q.tags.push_back(tag_from_name(name));
        }
        const int intent = j.at("intent").get<int>();
        if (intent != 0 && intent != 1) throw ContractError("intent must be 0 or 1");
        q.is_store_lookup = intent == 1;
    } catch (const json::exception& e) {
        throw ContractError(std::string("bad dataset line: ") + e.what());
    }
    q.validate();
    return q;
}

void write_dataset(const std::vector<LabeledQuery>& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: byte-stable newlines
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& q : corpus) out << dataset_line(q) << '\n';
    if (!out) throw IoError("failed writing dataset to " + path);
}

std::vector<LabeledQuery> read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file " + path);
    std::vector<LabeledQuery> corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            corpus.push_back(parse_dataset_line(line));
        } catch (const Error& e) {
            throw ContractError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return corpus;
}

}  // namespace jtner
