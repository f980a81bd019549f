#include "jtner/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "jtner/errors.hpp"
#include "jtner/heads.hpp"

namespace jtner {

std::vector<Span> extract_spans(const std::vector<Tag>& tags) {
    std::vector<Span> spans;
    int start = -1;
    for (int i = 0; i <= static_cast<int>(tags.size()); ++i) {
        const Tag t = i < static_cast<int>(tags.size()) ? tags[static_cast<std::size_t>(i)] : Tag::O;
        const bool continues = t == Tag::IStore && start >= 0;
        if (start >= 0 && !continues) {
            spans.push_back({start, i - 1});
            start = -1;
        }
        if (t == Tag::BStore) start = i;
    }
    return spans;
}

namespace {

double safe_ratio(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

void finish_score(ModelScore& s) {
    s.precision = safe_ratio(s.tp, s.tp + s.fp);
    s.recall = safe_ratio(s.tp, s.tp + s.fn);
    const double pr = s.precision + s.recall;
    s.f1 = pr == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / pr;
}

}  // namespace

ModelScore score(const std::vector<LabeledQuery>& gold, const std::vector<std::vector<Tag>>& predicted,
                 std::string model_name) {
    if (gold.size() != predicted.size()) {
        throw ContractError("score: " + std::to_string(gold.size()) + " gold queries vs " +
                            std::to_string(predicted.size()) + " predictions");
    }
    ModelScore s;
    s.model = std::move(model_name);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].tags.size() != predicted[i].size()) {
            throw ContractError("score: tag length mismatch on query " + std::to_string(i));
        }
        const std::vector<Span> g = extract_spans(gold[i].tags);
        const std::vector<Span> p = extract_spans(predicted[i]);
        const std::set<Span> gset(g.begin(), g.end());
        for (const Span& sp : p) {
            if (gset.count(sp)) {
                s.tp += 1;
            } else {
                s.fp += 1;
            }
        }
        const std::set<Span> pset(p.begin(), p.end());
        for (const Span& sp : g) {
            if (!pset.count(sp)) s.fn += 1;
        }
    }
    finish_score(s);
    return s;
}

TaggedQuery tag_tokens(Checkpoint& ckpt, const std::vector<std::string>& tokens, const TagOptions& opts) {
    if (tokens.empty()) throw ContractError("cannot tag an empty query");
    TaggedQuery out;
    out.tokens = tokens;
    const std::vector<int> ids = ckpt.vocab.lookup(tokens);

    Tape tape;
    ParamBinder bind(tape, ckpt.params);
    const int h = build_encoder(tape, bind, ids, ckpt.encoder);
    const Tensor logits = tape.value(build_ner_head(tape, bind, h));
    const Tensor scores = tape.value(build_intent_head(tape, bind, h));

    out.tags = repair_bio(predict_tags(logits));
    out.intent_scores = scores.data;
    const QueryIntent qi = query_intent(scores);
    out.mean_intent = qi.mean_score;
    out.is_store_intent = qi.mean_score > opts.intent_threshold;
    if (opts.gate_entities_on_intent && !out.is_store_intent) {
        std::fill(out.tags.begin(), out.tags.end(), Tag::O);
    }
    return out;
}

ModelScore evaluate(Checkpoint& ckpt, const std::vector<LabeledQuery>& test, std::string model_name,
                    const TagOptions& opts) {
    if (test.empty()) throw ContractError("test set is empty");
    std::vector<std::vector<Tag>> predicted;
    predicted.reserve(test.size());
    for (const auto& q : test) predicted.push_back(tag_tokens(ckpt, q.tokens, opts).tags);
    return score(test, predicted, std::move(model_name));
}

EvalReport compare(Checkpoint& base_ckpt, Checkpoint& multitask_ckpt, const std::vector<LabeledQuery>& test) {
    if (!(base_ckpt.vocab == multitask_ckpt.vocab)) {
        throw ContractError("compare: checkpoints were trained with different vocabularies");
    }
    if (base_ckpt.tags != multitask_ckpt.tags) {
        throw ContractError("compare: checkpoints disagree on the tag set");
    }
    EvalReport r;
    r.base = evaluate(base_ckpt, test, "base");
    r.multitask = evaluate(multitask_ckpt, test, "multitask");
    r.precision_delta = r.multitask.precision - r.base.precision;
    r.recall_delta = r.multitask.recall - r.base.recall;
    r.f1_delta = r.multitask.f1 - r.base.f1;
    r.test_size = static_cast<int>(test.size());
    return r;
}

std::vector<IntentReportRow> intent_report(Checkpoint& ckpt, const std::vector<LabeledQuery>& test) {
    if (test.empty()) throw ContractError("test set is empty");
    std::vector<IntentReportRow> rows;
    rows.reserve(test.size());
    for (const auto& q : test) {
        const TaggedQuery t = tag_tokens(ckpt, q.tokens);
        IntentReportRow row;
        row.tokens = q.tokens;
        row.scores = t.intent_scores;
        row.mean_score = t.mean_intent;
        row.gold_is_store = q.is_store_lookup;
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string fmt(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

void append_row(std::string& out, const std::string& a, const std::string& b, const std::string& c,
                const std::string& d) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %10s %10s %10s\n", a.c_str(), b.c_str(), c.c_str(), d.c_str());
    out += buf;
}

}  // namespace

std::string render_score_table(const std::vector<ModelScore>& rows) {
    std::string out;
    append_row(out, "Algorithm", "Precision", "Recall", "F-1 Score");
    for (const ModelScore& s : rows) {
        append_row(out, s.model, fmt(s.precision), fmt(s.recall), fmt(s.f1));
    }
    return out;
}

std::string render_compare_table(const EvalReport& r) {
    std::string out = render_score_table({r.multitask, r.base});
    append_row(out, "delta", fmt(r.precision_delta, "%+.4f"), fmt(r.recall_delta, "%+.4f"),
               fmt(r.f1_delta, "%+.4f"));
    return out;
}

std::string score_json_line(const ModelScore& s) {
    std::ostringstream os;
    os << "{\"model\":\"" << s.model << "\",\"precision\":" << fmt(s.precision, "%.6f")
       << ",\"recall\":" << fmt(s.recall, "%.6f") << ",\"f1\":" << fmt(s.f1, "%.6f") << ",\"tp\":" << s.tp
       << ",\"fp\":" << s.fp << ",\"fn\":" << s.fn << "}";
    return os.str();
}

}  // namespace jtner
