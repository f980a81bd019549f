#include "jtner/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jtner/heads.hpp"
#include "jtner/tape.hpp"

namespace jtner {

std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::kBase: return "base";
        case TrainMode::kMultitask: return "multitask";
        case TrainMode::kSummed: return "summed";
    }
    return "?";
}

std::string to_string(OptimizerKind o) { return o == OptimizerKind::kSgd ? "sgd" : "adam"; }

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "base") return TrainMode::kBase;
    if (s == "multitask") return TrainMode::kMultitask;
    if (s == "summed") return TrainMode::kSummed;
    throw ContractError("unknown training mode \"" + s + "\" (expected base|multitask|summed)");
}

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::kSgd;
    if (s == "adam") return OptimizerKind::kAdam;
    throw ContractError("unknown optimizer \"" + s + "\" (expected sgd|adam)");
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ContractError("lr must be > 0");
    if (intent_lr_factor < 0.0) throw ContractError("intent_lr_factor must be >= 0");
    if (intent_loss_weight < 0.0) throw ContractError("intent_loss_weight must be >= 0");
    if (epochs < 1) throw ContractError("epochs must be >= 1");
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0) {
        throw ContractError("adam betas must be in (0,1)");
    }
    if (adam_eps <= 0.0) throw ContractError("adam_eps must be > 0");
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

std::vector<int> tag_ids(const LabeledQuery& q) {
    std::vector<int> ids;
    ids.reserve(q.tags.size());
    for (Tag t : q.tags) ids.push_back(static_cast<int>(t));
    return ids;
}

// Mean over the batch of per-query mean tag losses.
int build_ner_batch_loss(Tape& tape, ParamBinder& bind, const std::vector<LabeledQuery>& batch,
                         const EncoderConfig& enc, const Vocabulary& vocab) {
    std::vector<int> losses;
    losses.reserve(batch.size());
    for (const LabeledQuery& q : batch) {
        const int h = build_encoder(tape, bind, vocab.lookup(q.tokens), enc);
        const int logits = build_ner_head(tape, bind, h);
        losses.push_back(tape.reshape(tape.cross_entropy(logits, tag_ids(q)), {1}));
    }
    return tape.mean(tape.concat_rows(losses));
}

int build_intent_batch_loss(Tape& tape, ParamBinder& bind, const std::vector<LabeledQuery>& batch,
                            const EncoderConfig& enc, const Vocabulary& vocab) {
    std::vector<int> losses;
    losses.reserve(batch.size());
    for (const LabeledQuery& q : batch) {
        const int h = build_encoder(tape, bind, vocab.lookup(q.tokens), enc);
        const int scores = build_intent_head(tape, bind, h);
        const auto labels = expand_intent_labels(q.is_store_lookup, static_cast<int>(q.tokens.size()));
        losses.push_back(tape.reshape(tape.logistic_loss(scores, labels), {1}));
    }
    return tape.mean(tape.concat_rows(losses));
}

// Shared trunk: each query is encoded once and feeds both heads.
struct SummedLosses {
    int ner;
    int intent;
    int combined;
};

SummedLosses build_summed_batch_loss(Tape& tape, ParamBinder& bind, const std::vector<LabeledQuery>& batch,
                                     const EncoderConfig& enc, const Vocabulary& vocab, double weight) {
    std::vector<int> ner_losses, intent_losses;
    ner_losses.reserve(batch.size());
    intent_losses.reserve(batch.size());
    for (const LabeledQuery& q : batch) {
        const int h = build_encoder(tape, bind, vocab.lookup(q.tokens), enc);
        const int logits = build_ner_head(tape, bind, h);
        ner_losses.push_back(tape.reshape(tape.cross_entropy(logits, tag_ids(q)), {1}));
        const int scores = build_intent_head(tape, bind, h);
        const auto labels = expand_intent_labels(q.is_store_lookup, static_cast<int>(q.tokens.size()));
        intent_losses.push_back(tape.reshape(tape.logistic_loss(scores, labels), {1}));
    }
    SummedLosses out{};
    out.ner = tape.mean(tape.concat_rows(ner_losses));
    out.intent = tape.mean(tape.concat_rows(intent_losses));
    out.combined = tape.add(out.ner, tape.scale(out.intent, weight));
    return out;
}

void apply_update(TrainState& state, const GradMap& grads, const TrainConfig& cfg, double lr) {
    for (const auto& [name, g] : grads) {
        Tensor& p = state.params.at(name);
        if (cfg.optimizer == OptimizerKind::kSgd) {
            for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * g.data[i];
        } else {
            Moments& mo = state.moments.at(name);
            mo.t += 1;
            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(mo.t));
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(mo.t));
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                const double gi = g.data[i];
                mo.m[i] = cfg.adam_beta1 * mo.m[i] + (1.0 - cfg.adam_beta1) * gi;
                mo.v[i] = cfg.adam_beta2 * mo.v[i] + (1.0 - cfg.adam_beta2) * gi * gi;
                const double mhat = mo.m[i] / bc1;
                const double vhat = mo.v[i] / bc2;
                p.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            }
        }
    }
}

void check_batch(const std::vector<LabeledQuery>& batch) {
    if (batch.empty()) throw ContractError("training batch is empty");
    for (const auto& q : batch) q.validate();
}

[[noreturn]] void rethrow_divergence(const char* loss_name, const NumericError& e) {
    throw DivergenceError(loss_name, std::string(loss_name) + " diverged: " + e.what());
}

}  // namespace

TrainState init_train_state(const EncoderConfig& enc, const TrainConfig& cfg) {
    cfg.validate();
    TrainState state;
    state.params = init_params(enc);
    if (cfg.optimizer == OptimizerKind::kAdam) {
        for (const auto& [name, t] : state.params.values) {
            Moments mo;
            mo.m.assign(t.data.size(), 0.0);
            mo.v.assign(t.data.size(), 0.0);
            state.moments[name] = std::move(mo);
        }
    }
    state.shuffle_rng.seed(cfg.seed ^ kShuffleStream);
    return state;
}

StepLosses train_step_multitask(const std::vector<LabeledQuery>& batch, TrainState& state, const TrainConfig& cfg,
                                const EncoderConfig& enc, const Vocabulary& vocab) {
    check_batch(batch);
    StepLosses out{};
    try {
        Tape tape;
        ParamBinder bind(tape, state.params);
        const int loss = build_ner_batch_loss(tape, bind, batch, enc, vocab);
        out.ner = tape.value(loss).data[0];
        apply_update(state, tape.backward(loss), cfg, cfg.lr);
    } catch (const NumericError& e) {
        rethrow_divergence("ner_loss", e);
    }
    try {
        // Fresh forward through the just-updated encoder.
        Tape tape;
        ParamBinder bind(tape, state.params);
        const int loss = build_intent_batch_loss(tape, bind, batch, enc, vocab);
        out.intent = tape.value(loss).data[0];
        apply_update(state, tape.backward(loss), cfg, cfg.lr * cfg.intent_lr_factor);
    } catch (const NumericError& e) {
        rethrow_divergence("intent_loss", e);
    }
    state.step_count += 1;
    return out;
}

double train_step_base(const std::vector<LabeledQuery>& batch, TrainState& state, const TrainConfig& cfg,
                       const EncoderConfig& enc, const Vocabulary& vocab) {
    check_batch(batch);
    double value = 0.0;
    try {
        Tape tape;
        ParamBinder bind(tape, state.params);
        const int loss = build_ner_batch_loss(tape, bind, batch, enc, vocab);
        value = tape.value(loss).data[0];
        apply_update(state, tape.backward(loss), cfg, cfg.lr);
    } catch (const NumericError& e) {
        rethrow_divergence("ner_loss", e);
    }
    state.step_count += 1;
    return value;
}

StepLosses train_step_summed(const std::vector<LabeledQuery>& batch, TrainState& state, const TrainConfig& cfg,
                             const EncoderConfig& enc, const Vocabulary& vocab) {
    check_batch(batch);
    StepLosses out{};
    try {
        Tape tape;
        ParamBinder bind(tape, state.params);
        const SummedLosses losses = build_summed_batch_loss(tape, bind, batch, enc, vocab, cfg.intent_loss_weight);
        out.ner = tape.value(losses.ner).data[0];
        out.intent = tape.value(losses.intent).data[0];
        out.combined = tape.value(losses.combined).data[0];
        apply_update(state, tape.backward(losses.combined), cfg, cfg.lr);
    } catch (const NumericError& e) {
        rethrow_divergence("summed_loss", e);
    }
    state.step_count += 1;
    return out;
}

namespace {

Checkpoint make_checkpoint(const TrainState& state, const EncoderConfig& enc, const TrainConfig& cfg,
                           const Vocabulary& vocab) {
    Checkpoint ckpt;
    ckpt.encoder = enc;
    ckpt.train = cfg;
    ckpt.vocab = vocab;
    ckpt.params = state.params;
    ckpt.tags = tag_names();
    ckpt.step_count = state.step_count;
    return ckpt;
}

}  // namespace

Checkpoint train(const std::vector<LabeledQuery>& corpus, const TrainConfig& cfg, EncoderConfig enc,
                 std::ostream* log) {
    cfg.validate();
    if (corpus.empty()) throw ContractError("training corpus is empty");
    for (const auto& q : corpus) q.validate();

    const Vocabulary vocab = build_vocab(corpus);
    enc.vocab_size = vocab.size();
    enc.validate();

    TrainState state = init_train_state(enc, cfg);
    Checkpoint last_good = make_checkpoint(state, enc, cfg, vocab);

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        state.epoch = epoch;
        std::shuffle(order.begin(), order.end(), state.shuffle_rng);
        double ner_sum = 0.0, intent_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            std::vector<LabeledQuery> batch;
            batch.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) batch.push_back(corpus[order[i]]);
            try {
                switch (cfg.mode) {
                    case TrainMode::kBase:
                        ner_sum += train_step_base(batch, state, cfg, enc, vocab);
                        break;
                    case TrainMode::kMultitask: {
                        const StepLosses l = train_step_multitask(batch, state, cfg, enc, vocab);
                        ner_sum += l.ner;
                        intent_sum += l.intent;
                        break;
                    }
                    case TrainMode::kSummed: {
                        const StepLosses l = train_step_summed(batch, state, cfg, enc, vocab);
                        ner_sum += l.ner;
                        intent_sum += l.intent;
                        break;
                    }
                }
            } catch (DivergenceError& e) {
                e.last_good = std::make_shared<Checkpoint>(std::move(last_good));
                throw;
            }
            ++steps;
        }
        if (log) {
            const double ner = ner_sum / static_cast<double>(steps);
            (*log) << "epoch=" << epoch << " ner_loss=" << ner << " intent_loss=";
            if (cfg.mode == TrainMode::kBase) {
                (*log) << "NA";
            } else {
                (*log) << intent_sum / static_cast<double>(steps);
            }
            (*log) << '\n';
        }
        last_good = make_checkpoint(state, enc, cfg, vocab);
    }
    return last_good;
}

}  // namespace jtner
