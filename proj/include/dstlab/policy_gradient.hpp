#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dstlab/corpus.hpp"
#include "dstlab/optim.hpp"
#include "dstlab/rng.hpp"
#include "dstlab/tracker.hpp"

namespace dstlab {

struct PGConfig {
    int batch_size = 16;
    int eval_every_batches = 5;
    int rollback_patience = 15;
    double entropy_weight = 0.01;  // alpha
    double learning_rate = 1e-3;
    int max_batches = 1000;
    double presence_threshold = 0.5;  // greedy/baseline decoding
    std::uint64_t seed = 1;
    // When false, presence is thresholded instead of sampled and only value
    // choices contribute to log-prob and entropy (ablation switch).
    bool sample_presence = true;
};

// Set Jaccard over (slot, value) pairs; two empty states count as a perfect
// match (1.0).
double jaccard_reward(const BeliefState& predicted, const BeliefState& gold);

struct SampledAction {
    BeliefState belief;
    NodeId log_prob;
    NodeId entropy;
};

// Dialogue-end action from the final turn's prediction: per slot, sample
// presence ~ Bernoulli(p) and, if present, a value from the distribution.
// log_prob and entropy come back as live graph nodes.
SampledAction sample_action(Tape& tape, const TurnNodes& final_pred, const DomainOntology& dom,
                            Rng& rng, const PGConfig& cfg);

// Same term composition for a fixed action instead of a sampled one. Used to
// re-score an action under (possibly updated) parameters.
SampledAction score_action(Tape& tape, const TurnNodes& final_pred, const DomainOntology& dom,
                           const BeliefState& action_belief, const PGConfig& cfg);

// Greedy decode of a frozen model scored against the gold final state.
double baseline_reward(const Tracker& frozen, const Dialogue& dialogue,
                       const BeliefState& gold_final, double threshold = 0.5);

// Frozen copy of the pretrained model; rewards are deterministic, so they
// are cached per dialogue id.
class FrozenBaseline {
public:
    explicit FrozenBaseline(const Tracker& pretrained, double threshold = 0.5);
    double reward(const Dialogue& dialogue) const;
    const Tracker& tracker() const { return frozen_; }

private:
    Tracker frozen_;
    double threshold_;
    mutable std::map<std::string, double> cache_;
};

struct BatchStats {
    double mean_reward = 0.0;
    double mean_advantage = 0.0;
    double mean_entropy = 0.0;
    double grad_norm = 0.0;
};

// One ascent step on the surrogate mean(log_prob * advantage + alpha *
// entropy); rewards and advantages are constants in the objective.
BatchStats pg_update(Tracker& live, std::span<const Dialogue* const> batch,
                     const FrozenBaseline& baseline, const PGConfig& cfg, AdamState& opt,
                     Rng& action_rng);

enum class HillClimbDecision { kSaved, kContinued, kRolledBack };

const char* to_string(HillClimbDecision d);

struct HillClimbState {
    double best_dev_reward = -std::numeric_limits<double>::infinity();
    ModelParams best_params;
    int evals_since_improvement = 0;
    int rollback_count = 0;
};

// Side effects owned by the run and reset on rollback.
struct PGRunContext {
    AdamState* optimizer = nullptr;
    Rng* action_rng = nullptr;
    std::uint64_t seed = 0;
    int* action_substream = nullptr;
};

// Saves on improvement; after `patience` stale evaluations restores the best
// snapshot, resets the optimizer moments and moves action sampling to a
// fresh substream.
HillClimbDecision hill_climb_step(HillClimbState& state, ModelParams& live, double dev_reward,
                                  int patience, const PGRunContext& ctx = {});

double mean_greedy_reward(const Tracker& model, std::span<const Dialogue* const> dialogues,
                          double threshold = 0.5);

struct PGEvalRecord {
    int batch = 0;
    double mean_reward = 0.0;
    double mean_advantage = 0.0;
    double mean_entropy = 0.0;
    double dev_reward = 0.0;
    double dev_turn_acc = 0.0;
    std::string decision;
};

struct PGRun {
    std::vector<PGEvalRecord> history;
    double best_dev_reward = 0.0;
    int rollbacks = 0;
};

// Clones the pretrained model into a live policy and a frozen baseline, then
// runs batched policy-gradient updates with periodic dev evaluation and hill
// climbing. The model is left holding the best snapshot.
PGRun finetune_pg(Tracker& model, const Corpus& corpus, const std::string& target_domain,
                  const PGConfig& cfg);

void write_pg_history_csv(const std::vector<PGEvalRecord>& history, const std::string& path);

}  // namespace dstlab
