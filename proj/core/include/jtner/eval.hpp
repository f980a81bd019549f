#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "jtner/trainer.hpp"

namespace jtner {

/// Contiguous entity extent, token indices inclusive. Single entity type.
struct Span {
    int start = 0;
    int end = 0;
    std::string label = "STORE";
    bool operator==(const Span&) const = default;
    bool operator<(const Span& o) const { return std::tie(start, end, label) < std::tie(o.start, o.end, o.label); }
};

/// Maximal B-STORE (I-STORE)* runs, left to right. Callers repair model
/// output first; gold tags are valid by construction.
std::vector<Span> extract_spans(const std::vector<Tag>& tags);

/// Span-level micro-averaged counts and derived metrics. A predicted span is
/// a true positive only on an exact (start, end, label) match within its
/// query; 0/0 rates are defined as 0.
struct ModelScore {
    std::string model;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

ModelScore score(const std::vector<LabeledQuery>& gold, const std::vector<std::vector<Tag>>& predicted,
                 std::string model_name);

/// Inference-time knobs. Gating and the intent threshold are experiment
/// hooks; both default to the plain argmax path.
struct TagOptions {
    bool gate_entities_on_intent = false;  // suppress STORE tags when the query intent is negative
    double intent_threshold = 0.0;         // query intent = mean score strictly above this
};

struct TaggedQuery {
    std::vector<std::string> tokens;
    std::vector<Tag> tags;  // argmax + BIO repair (+ optional gating)
    std::vector<double> intent_scores;
    double mean_intent = 0.0;
    bool is_store_intent = false;
};

TaggedQuery tag_tokens(Checkpoint& ckpt, const std::vector<std::string>& tokens, const TagOptions& opts = {});

ModelScore evaluate(Checkpoint& ckpt, const std::vector<LabeledQuery>& test, std::string model_name,
                    const TagOptions& opts = {});

/// Two-model comparison on identical test data (the same-seed protocol).
struct EvalReport {
    ModelScore multitask;
    ModelScore base;
    double precision_delta = 0.0;  // multitask - base
    double recall_delta = 0.0;
    double f1_delta = 0.0;
    int test_size = 0;
};

EvalReport compare(Checkpoint& base_ckpt, Checkpoint& multitask_ckpt, const std::vector<LabeledQuery>& test);

struct IntentReportRow {
    std::vector<std::string> tokens;
    std::vector<double> scores;
    double mean_score = 0.0;
    bool gold_is_store = false;
};

/// Per-query intent scores for the qualitative signed-score check.
std::vector<IntentReportRow> intent_report(Checkpoint& ckpt, const std::vector<LabeledQuery>& test);

// Plain-text rendering: aligned columns Precision / Recall / F-1 Score, one
// row per model, plus a machine-readable JSON line per model.
std::string render_score_table(const std::vector<ModelScore>& rows);
std::string render_compare_table(const EvalReport& report);
std::string score_json_line(const ModelScore& s);

}  // namespace jtner
