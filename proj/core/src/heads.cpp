#include "jtner/heads.hpp"

#include "jtner/errors.hpp"

namespace jtner {

const std::vector<std::string>& tag_names() {
    static const std::vector<std::string> names = {"O", "B-STORE", "I-STORE"};
    return names;
}

const std::string& tag_name(Tag t) { return tag_names()[static_cast<std::size_t>(t)]; }

Tag tag_from_name(const std::string& name) {
    const auto& names = tag_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<Tag>(i);
    }
    throw ContractError("unknown tag \"" + name + "\"");
}

bool is_valid_bio(const std::vector<Tag>& tags) {
    Tag prev = Tag::O;
    for (Tag t : tags) {
        if (t == Tag::IStore && prev == Tag::O) return false;
        prev = t;
    }
    return true;
}

std::vector<int> expand_intent_labels(bool is_store_lookup, int n_tokens) {
    if (n_tokens < 1) throw ContractError("expand_intent_labels needs at least one token");
    return std::vector<int>(static_cast<std::size_t>(n_tokens), is_store_lookup ? 1 : 0);
}

int build_ner_head(Tape& tape, ParamBinder& bind, int h) {
    return tape.add_row_vec(tape.matmul(h, bind("ner.w")), bind("ner.b"));
}

int build_intent_head(Tape& tape, ParamBinder& bind, int h) {
    const int scores = tape.add_row_vec(tape.matmul(h, bind("intent.w")), bind("intent.b"));
    return tape.reshape(scores, {tape.value(h).rows()});
}

Tensor ner_logits(const Tensor& h, ModelParams& params) {
    Tape tape;
    ParamBinder bind(tape, params);
    return tape.value(build_ner_head(tape, bind, tape.input(h)));
}

Tensor intent_scores(const Tensor& h, ModelParams& params) {
    Tape tape;
    ParamBinder bind(tape, params);
    return tape.value(build_intent_head(tape, bind, tape.input(h)));
}

std::vector<Tag> predict_tags(const Tensor& logits) {
    if (logits.shape.size() != 2 || logits.cols() != kNumTags) {
        throw ShapeError("predict_tags expects [n," + std::to_string(kNumTags) + "] logits, got " +
                         shape_str(logits.shape));
    }
    std::vector<Tag> out;
    out.reserve(static_cast<std::size_t>(logits.rows()));
    for (int r = 0; r < logits.rows(); ++r) {
        int best = 0;
        for (int j = 1; j < logits.cols(); ++j) {
            if (logits.at(r, j) > logits.at(r, best)) best = j;  // strict: first max wins
        }
        out.push_back(static_cast<Tag>(best));
    }
    return out;
}

std::vector<Tag> repair_bio(const std::vector<Tag>& tags) {
    std::vector<Tag> out = tags;
    Tag prev = Tag::O;
    for (Tag& t : out) {
        if (t == Tag::IStore && prev == Tag::O) t = Tag::BStore;
        prev = t;
    }
    return out;
}

QueryIntent query_intent(const Tensor& scores) {
    if (scores.size() < 1) throw ContractError("query_intent over zero tokens");
    double sum = 0.0;
    for (double s : scores.data) sum += s;
    QueryIntent qi;
    qi.mean_score = sum / static_cast<double>(scores.size());
    qi.is_store_lookup = qi.mean_score > 0.0;
    return qi;
}

}  // namespace jtner
