#pragma once

#include <string>
#include <vector>

#include "jtner/encoder.hpp"
#include "jtner/tape.hpp"
#include "jtner/tensor.hpp"

namespace jtner {

/// BIO tags over a single entity type. O is index 0; the ordering is part of
/// the checkpoint format. A tag sequence is valid iff no I-STORE follows O or
/// start-of-sequence.
enum class Tag : int {
    O = 0,
    BStore = 1,
    IStore = 2,
};

const std::vector<std::string>& tag_names();
const std::string& tag_name(Tag t);
Tag tag_from_name(const std::string& name);  // throws ContractError on unknown
bool is_valid_bio(const std::vector<Tag>& tags);

/// Query-level intent copied to every token: all ones for a store lookup,
/// all zeros otherwise. The per-token duplication is what lets each word
/// carry its own intent score at inference time.
std::vector<int> expand_intent_labels(bool is_store_lookup, int n_tokens);

// Graph builders over encoder output h = [n, d_model].
int build_ner_head(Tape& tape, ParamBinder& bind, int h);     // -> [n, n_tags] logits
int build_intent_head(Tape& tape, ParamBinder& bind, int h);  // -> [n] raw scores

// Inference wrappers on a throwaway tape.
Tensor ner_logits(const Tensor& h, ModelParams& params);
Tensor intent_scores(const Tensor& h, ModelParams& params);

/// Per-token argmax over tag logits; ties break toward the lowest tag index,
/// i.e. O first, which biases toward precision. No intent gating here.
std::vector<Tag> predict_tags(const Tensor& logits);

/// Rewrites any I-STORE that does not continue a span into B-STORE. Never
/// changes which tokens carry a STORE tag. Idempotent.
std::vector<Tag> repair_bio(const std::vector<Tag>& tags);

struct QueryIntent {
    bool is_store_lookup = false;  // mean score strictly above 0
    double mean_score = 0.0;
};

/// Aggregates per-token scores for reporting; training never uses this.
QueryIntent query_intent(const Tensor& scores);

}  // namespace jtner
