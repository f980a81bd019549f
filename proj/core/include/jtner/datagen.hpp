#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "jtner/heads.hpp"

namespace jtner {

/// One dataset record: whitespace-level tokens, aligned BIO tags, and the
/// query-level intent bit. Generated data always satisfies
/// is_store_lookup == (at least one STORE span); model output need not.
struct LabeledQuery {
    std::vector<std::string> tokens;
    std::vector<Tag> tags;
    bool is_store_lookup = false;

    void validate() const;  // lengths equal, BIO valid
    bool operator==(const LabeledQuery&) const = default;
};

struct GenConfig {
    int n_queries = 1000;
    double store_fraction = 0.5;
    double ambiguity_rate = 0.4;  // fraction of queries filled from the shared lexicon
    std::uint64_t seed = 1;

    void validate() const;
};

/// Word lists for template fills. The "ambiguous" phrases are valid both as
/// store locations and as items; they are the benchmark's difficulty dial
/// and live in an editable data file shipped with the repo.
struct Lexicon {
    std::vector<std::string> ambiguous;
    std::vector<std::string> locations_only;
    std::vector<std::string> items_only;

    void validate() const;
};

const Lexicon& default_lexicon();                 // compiled in from core/data/lexicon.json
Lexicon load_lexicon(const std::string& path);    // same schema, external file
Lexicon parse_lexicon_json(const std::string& text);

/// Deterministic template-based corpus. Store-lookup queries carry exactly
/// one STORE span covering the location fill; other queries are all-O.
/// Class balance matches store_fraction within one query.
std::vector<LabeledQuery> generate_corpus(const GenConfig& cfg);
std::vector<LabeledQuery> generate_corpus(const GenConfig& cfg, const Lexicon& lexicon);

/// Deterministic stratified shuffle-split; each intent class lands within
/// one query of test_fraction.
std::pair<std::vector<LabeledQuery>, std::vector<LabeledQuery>> split(const std::vector<LabeledQuery>& corpus,
                                                                      double test_fraction, std::uint64_t seed);

/// Token ids; 0 is reserved for padding (never produced), 1 is UNK.
struct Vocabulary {
    static constexpr int kPadId = 0;
    static constexpr int kUnkId = 1;

    std::vector<std::string> id_to_token;  // ["<pad>", "<unk>", ...]
    std::unordered_map<std::string, int> token_to_id;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int lookup(const std::string& token) const;
    std::vector<int> lookup(const std::vector<std::string>& tokens) const;
    bool operator==(const Vocabulary& other) const { return id_to_token == other.id_to_token; }
};

/// Ids in first-appearance order over the training corpus, after the two
/// reserved ids.
Vocabulary build_vocab(const std::vector<LabeledQuery>& train);

/// Lowercase, split on whitespace runs, strip surrounding punctuation from
/// each token; tokens that were pure punctuation are dropped.
std::vector<std::string> tokenize(const std::string& text);

// Line-delimited dataset file: one JSON object per line with fields
// "tokens" (string list), "tags" (string list), "intent" (0/1).
void write_dataset(const std::vector<LabeledQuery>& corpus, const std::string& path);
std::vector<LabeledQuery> read_dataset(const std::string& path);
std::string dataset_line(const LabeledQuery& q);
LabeledQuery parse_dataset_line(const std::string& line);

}  // namespace jtner
