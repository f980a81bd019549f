#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "jtner/datagen.hpp"
#include "jtner/encoder.hpp"
#include "jtner/errors.hpp"

namespace jtner {

enum class TrainMode { kBase, kMultitask, kSummed };
enum class OptimizerKind { kSgd, kAdam };

std::string to_string(TrainMode m);
std::string to_string(OptimizerKind o);
TrainMode train_mode_from_string(const std::string& s);        // throws ContractError
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
    TrainMode mode = TrainMode::kMultitask;
    double lr = 1e-3;
    double intent_lr_factor = 0.1;   // multitask: LR multiplier for the intent pass
    double intent_loss_weight = 0.1; // summed: weight of the intent term
    int epochs = 30;
    int batch_size = 16;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::kAdam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

struct Moments {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;  // per-parameter update count for bias correction
};

struct TrainState {
    ModelParams params;
    std::map<std::string, Moments> moments;  // present iff optimizer is adam
    std::uint64_t step_count = 0;
    int epoch = 0;
    std::mt19937_64 shuffle_rng;  // dedicated stream for per-epoch shuffles
};

TrainState init_train_state(const EncoderConfig& enc, const TrainConfig& cfg);

/// Everything needed to evaluate or resume a model identically.
struct Checkpoint {
    EncoderConfig encoder;
    TrainConfig train;
    Vocabulary vocab;
    ModelParams params;
    std::vector<std::string> tags;  // fixed order, serialized literally
    std::uint64_t step_count = 0;
};

/// A loss went non-finite. train() attaches the last epoch-end checkpoint so
/// callers can keep it.
struct DivergenceError : Error {
    DivergenceError(std::string loss, const std::string& msg) : Error(msg), loss_name(std::move(loss)) {}
    std::string loss_name;
    std::shared_ptr<const Checkpoint> last_good;
};

struct StepLosses {
    double ner = 0.0;
    double intent = 0.0;    // meaningful for multitask and summed
    double combined = 0.0;  // meaningful for summed
};

/// One multitask step: two distinct forward/backward passes, run separately
/// and sequentially. Pass 1 optimizes the tag loss at the base rate; pass 2
/// re-runs the forward through the just-updated encoder and optimizes the
/// intent loss at lr * intent_lr_factor. Returned losses are the values
/// observed before each pass's own update.
StepLosses train_step_multitask(const std::vector<LabeledQuery>& batch, TrainState& state, const TrainConfig& cfg,
                                const EncoderConfig& enc, const Vocabulary& vocab);

/// Pass 1 only; intent-head parameters are never touched.
double train_step_base(const std::vector<LabeledQuery>& batch, TrainState& state, const TrainConfig& cfg,
                       const EncoderConfig& enc, const Vocabulary& vocab);

/// Single forward building both heads; loss = ner + intent_loss_weight *
/// intent, one backward, one update at lr.
StepLosses train_step_summed(const std::vector<LabeledQuery>& batch, TrainState& state, const TrainConfig& cfg,
                             const EncoderConfig& enc, const Vocabulary& vocab);

/// Epoch loop with per-epoch shuffling and one machine-parseable log line
/// per epoch: `epoch=<i> ner_loss=<f> intent_loss=<f|NA>`. vocab_size in the
/// returned checkpoint's encoder config comes from the corpus vocabulary.
Checkpoint train(const std::vector<LabeledQuery>& corpus, const TrainConfig& cfg, EncoderConfig enc,
                 std::ostream* log = nullptr);

}  // namespace jtner
