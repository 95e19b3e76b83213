#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dstlab/corpus.hpp"
#include "dstlab/tracker.hpp"

namespace dstlab {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 16;
    int early_stop_patience_epochs = 20;
    int max_epochs = 100;
    std::uint64_t seed = 1;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double dev_jga = 0.0;
    double dev_turn_acc = 0.0;
    double seconds = 0.0;
    int optimizer_steps = 0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;  // 1-based epoch number of the returned model
    double best_dev_jga = -1.0;
};

// log(p (1 - 2 eps) + eps) with eps = 1e-12: finite at p = 0, strictly
// negative at p = 1, and exact at p = 0.5.
NodeId clamped_log(Tape& tape, NodeId p);
double clamped_log_value(double p);

// Presence binary cross-entropy over all slots plus categorical
// cross-entropy on the gold value for gold-present slots; probabilities
// clamped at eps = 1e-12.
NodeId turn_loss(Tape& tape, const TurnNodes& pred, const std::vector<SlotValue>& gold,
                 const DomainOntology& dom);

// Fraction of turns whose folded decoded belief state equals the gold
// cumulative state exactly.
double joint_goal_accuracy(const Tracker& model, std::span<const Dialogue* const> dialogues,
                           double threshold = 0.5);

struct TrainResult {
    TrainHistory history;
};

// Dialogue-level minibatches, loss averaged over all turns in the batch, one
// Adam step per batch, per-epoch dev evaluation, early stopping on dev joint
// goal accuracy. The model is left holding the best checkpoint.
TrainResult train_supervised(Tracker& model, std::span<const Dialogue* const> train,
                             std::span<const Dialogue* const> dev, const TrainConfig& cfg);

TrainResult train_supervised(Tracker& model, const Corpus& corpus, const TrainConfig& cfg);

void write_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace dstlab
