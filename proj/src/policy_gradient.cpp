#include "dstlab/policy_gradient.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "dstlab/eval.hpp"
#include "dstlab/supervised.hpp"

namespace dstlab {

double jaccard_reward(const BeliefState& predicted, const BeliefState& gold) {
    if (predicted.empty() && gold.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& [slot, value] : predicted.entries()) {
        if (gold.value_of(slot) == value) ++inter;
    }
    const std::size_t uni = predicted.size() + gold.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct ActionOutcome {
    std::vector<bool> present;
    std::vector<int> value;  // -1 when absent
};

SampledAction compose_action(Tape& tape, const TurnNodes& final_pred, const DomainOntology& dom,
                             const ActionOutcome& outcome, const PGConfig& cfg) {
    SampledAction action;
    std::vector<NodeId> log_terms;
    std::vector<NodeId> entropy_terms;

    for (std::size_t s = 0; s < dom.slots.size(); ++s) {
        NodeId p = final_pred.presence[s];
        NodeId dist = final_pred.value_dist[s];
        NodeId one_minus_p = tape.add_const(tape.scale(p, -1.0), 1.0);

        // categorical entropy: -sum(d .* clamped_log(d))
        NodeId cat_h = tape.scale(tape.dot(dist, clamped_log(tape, dist)), -1.0);

        if (cfg.sample_presence) {
            NodeId log_p = clamped_log(tape, p);
            NodeId log_1mp = clamped_log(tape, one_minus_p);
            log_terms.push_back(outcome.present[s] ? log_p : log_1mp);
            // Bernoulli entropy: -(p log p + (1-p) log(1-p))
            NodeId bern = tape.scale(
                tape.add(tape.mul(p, log_p), tape.mul(one_minus_p, log_1mp)), -1.0);
            entropy_terms.push_back(bern);
            entropy_terms.push_back(tape.scale_by(cat_h, p));
        } else if (outcome.present[s]) {
            entropy_terms.push_back(cat_h);
        }

        if (outcome.present[s]) {
            const int j = outcome.value[s];
            log_terms.push_back(clamped_log(tape, tape.pick(dist, static_cast<std::int64_t>(j))));
            action.belief.set(dom.slots[s], dom.values[s][static_cast<std::size_t>(j)]);
        }
    }

    action.log_prob = log_terms.empty() ? tape.constant_scalar(0.0) : tape.sum_nodes(log_terms);
    action.entropy = entropy_terms.empty() ? tape.constant_scalar(0.0) : tape.sum_nodes(entropy_terms);
    return action;
}

}  // namespace

SampledAction sample_action(Tape& tape, const TurnNodes& final_pred, const DomainOntology& dom,
                            Rng& rng, const PGConfig& cfg) {
    ActionOutcome outcome;
    for (std::size_t s = 0; s < dom.slots.size(); ++s) {
        const double p_val = tape.value_scalar(final_pred.presence[s]);
        const bool present =
            cfg.sample_presence ? rng.uniform() < p_val : p_val > cfg.presence_threshold;
        outcome.present.push_back(present);
        if (present) {
            const auto dvals = tape.values(final_pred.value_dist[s]);
            outcome.value.push_back(static_cast<int>(
                rng.categorical(std::vector<double>(dvals.begin(), dvals.end()))));
        } else {
            outcome.value.push_back(-1);
        }
    }
    return compose_action(tape, final_pred, dom, outcome, cfg);
}

SampledAction score_action(Tape& tape, const TurnNodes& final_pred, const DomainOntology& dom,
                           const BeliefState& action_belief, const PGConfig& cfg) {
    ActionOutcome outcome;
    for (std::size_t s = 0; s < dom.slots.size(); ++s) {
        const auto v = action_belief.value_of(dom.slots[s]);
        outcome.present.push_back(v.has_value());
        if (v.has_value()) {
            const int j = dom.value_index(static_cast<int>(s), *v);
            if (j < 0) {
                throw std::invalid_argument("score_action: value '" + *v +
                                            "' not in ontology for slot '" + dom.slots[s] + "'");
            }
            outcome.value.push_back(j);
        } else {
            outcome.value.push_back(-1);
        }
    }
    return compose_action(tape, final_pred, dom, outcome, cfg);
}

double baseline_reward(const Tracker& frozen, const Dialogue& dialogue,
                       const BeliefState& gold_final, double threshold) {
    auto preds = frozen.forward_dialogue(dialogue);
    return jaccard_reward(decode_final_belief(preds, frozen.domain(), threshold), gold_final);
}

FrozenBaseline::FrozenBaseline(const Tracker& pretrained, double threshold)
    : frozen_(pretrained), threshold_(threshold) {}

double FrozenBaseline::reward(const Dialogue& dialogue) const {
    auto it = cache_.find(dialogue.id);
    if (it != cache_.end()) return it->second;
    const double b = baseline_reward(frozen_, dialogue, dialogue.turns.back().belief_state, threshold_);
    cache_.emplace(dialogue.id, b);
    return b;
}

BatchStats pg_update(Tracker& live, std::span<const Dialogue* const> batch,
                     const FrozenBaseline& baseline, const PGConfig& cfg, AdamState& opt,
                     Rng& action_rng) {
    if (batch.empty()) {
        throw std::invalid_argument("pg_update: empty batch");
    }
    static thread_local Tape tape;
    tape.reset();
    Tracker::Binding b = live.bind(tape);

    BatchStats stats;
    std::vector<NodeId> objectives;
    objectives.reserve(batch.size());
    for (const Dialogue* d : batch) {
        auto nodes = live.forward_on_tape(tape, b, *d);
        SampledAction action = sample_action(tape, nodes.back(), live.domain(), action_rng, cfg);
        const double reward = jaccard_reward(action.belief, d->turns.back().belief_state);
        const double advantage = reward - baseline.reward(*d);
        // rewards and advantages enter as constants
        objectives.push_back(tape.add(tape.scale(action.log_prob, advantage),
                                      tape.scale(action.entropy, cfg.entropy_weight)));
        stats.mean_reward += reward;
        stats.mean_advantage += advantage;
        stats.mean_entropy += tape.value_scalar(action.entropy);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    stats.mean_reward *= inv;
    stats.mean_advantage *= inv;
    stats.mean_entropy *= inv;

    NodeId surrogate = tape.scale(tape.sum_nodes(objectives), inv);
    tape.backward(surrogate);

    // ascent on the surrogate: negate the gradients, the optimizer minimizes
    auto params = live.params().tensors();
    std::vector<Tensor> grads;
    grads.reserve(b.trainable.size());
    double norm_sq = 0.0;
    for (NodeId id : b.trainable) {
        Tensor g = tape.grad_tensor(id);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            const double v = g[static_cast<std::size_t>(i)];
            norm_sq += v * v;
            g[static_cast<std::size_t>(i)] = -v;
        }
        grads.push_back(std::move(g));
    }
    stats.grad_norm = std::sqrt(norm_sq);
    adam_step(std::span<Tensor* const>(params.data(), params.size()),
              std::span<const Tensor>(grads.data(), grads.size()), opt, cfg.learning_rate);
    return stats;
}

const char* to_string(HillClimbDecision d) {
    switch (d) {
        case HillClimbDecision::kSaved: return "saved";
        case HillClimbDecision::kContinued: return "continued";
        case HillClimbDecision::kRolledBack: return "rolled_back";
    }
    return "?";
}

HillClimbDecision hill_climb_step(HillClimbState& state, ModelParams& live, double dev_reward,
                                  int patience, const PGRunContext& ctx) {
    if (dev_reward > state.best_dev_reward) {
        state.best_dev_reward = dev_reward;
        state.best_params = live;
        state.evals_since_improvement = 0;
        return HillClimbDecision::kSaved;
    }
    ++state.evals_since_improvement;
    if (state.evals_since_improvement < patience) {
        return HillClimbDecision::kContinued;
    }
    live = state.best_params;
    state.evals_since_improvement = 0;
    ++state.rollback_count;
    if (ctx.optimizer != nullptr) {
        // stale moments would push the restored model straight back off
        for (Tensor& m : ctx.optimizer->m) m.fill(0.0);
        for (Tensor& v : ctx.optimizer->v) v.fill(0.0);
        ctx.optimizer->t = 0;
    }
    if (ctx.action_rng != nullptr && ctx.action_substream != nullptr) {
        ++*ctx.action_substream;
        *ctx.action_rng = Rng(derive_stream(ctx.seed, "action", static_cast<std::uint64_t>(*ctx.action_substream)));
    }
    return HillClimbDecision::kRolledBack;
}

double mean_greedy_reward(const Tracker& model, std::span<const Dialogue* const> dialogues,
                          double threshold) {
    if (dialogues.empty()) return 0.0;
    double sum = 0.0;
    for (const Dialogue* d : dialogues) {
        auto preds = model.forward_dialogue(*d);
        sum += jaccard_reward(decode_final_belief(preds, model.domain(), threshold),
                              d->turns.back().belief_state);
    }
    return sum / static_cast<double>(dialogues.size());
}

PGRun finetune_pg(Tracker& model, const Corpus& corpus, const std::string& target_domain,
                  const PGConfig& cfg) {
    if (cfg.batch_size < 1 || cfg.eval_every_batches < 1 || cfg.rollback_patience < 1 ||
        cfg.learning_rate <= 0 || cfg.entropy_weight < 0 || cfg.max_batches < 0) {
        throw std::invalid_argument("finetune_pg: invalid config");
    }
    if (!corpus.ontology.domains.contains(target_domain)) {
        throw std::invalid_argument("finetune_pg: corpus has no domain '" + target_domain + "'");
    }
    model.bind_domain(corpus.ontology, target_domain);
    auto train = corpus.split_for("train", target_domain);
    auto dev = corpus.split_for("dev", target_domain);
    if (train.empty()) {
        throw std::invalid_argument("finetune_pg: no '" + target_domain + "' dialogues in train split");
    }

    FrozenBaseline baseline(model, cfg.presence_threshold);

    auto params = model.params().tensors();
    std::vector<const Tensor*> cparams(params.begin(), params.end());
    AdamState opt = make_adam_state(std::span<const Tensor* const>(cparams.data(), cparams.size()));

    Rng shuffle_rng(derive_stream(cfg.seed, "shuffle"));
    int action_substream = 0;
    Rng action_rng(derive_stream(cfg.seed, "action", 0));
    PGRunContext ctx{&opt, &action_rng, cfg.seed, &action_substream};

    HillClimbState hc;
    PGRun run;
    auto dev_span = std::span<const Dialogue* const>(dev.data(), dev.size());

    auto evaluate = [&](int batch, const BatchStats& window) {
        const double dev_reward = mean_greedy_reward(model, dev_span, cfg.presence_threshold);
        const double dev_acc = turn_level_accuracy(model, dev_span, cfg.presence_threshold);
        HillClimbDecision decision =
            hill_climb_step(hc, model.params(), dev_reward, cfg.rollback_patience, ctx);
        run.history.push_back({batch, window.mean_reward, window.mean_advantage,
                               window.mean_entropy, dev_reward, dev_acc, to_string(decision)});
    };

    // the pretrained model is the first snapshot
    evaluate(0, BatchStats{});

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // trigger shuffle on first use

    BatchStats window;
    int window_batches = 0;
    for (int batch = 1; batch <= cfg.max_batches; ++batch) {
        std::vector<const Dialogue*> picked;
        picked.reserve(static_cast<std::size_t>(cfg.batch_size));
        while (picked.size() < static_cast<std::size_t>(cfg.batch_size)) {
            if (cursor >= order.size()) {
                shuffle_rng.shuffle(order);
                cursor = 0;
            }
            picked.push_back(train[order[cursor++]]);
        }
        BatchStats stats = pg_update(model, std::span<const Dialogue* const>(picked.data(), picked.size()),
                                     baseline, cfg, opt, action_rng);
        window.mean_reward += stats.mean_reward;
        window.mean_advantage += stats.mean_advantage;
        window.mean_entropy += stats.mean_entropy;
        window.grad_norm += stats.grad_norm;
        ++window_batches;

        if (batch % cfg.eval_every_batches == 0) {
            const double inv = 1.0 / window_batches;
            BatchStats mean{window.mean_reward * inv, window.mean_advantage * inv,
                            window.mean_entropy * inv, window.grad_norm * inv};
            evaluate(batch, mean);
            window = BatchStats{};
            window_batches = 0;
        }
    }

    model.params() = hc.best_params;
    run.best_dev_reward = hc.best_dev_reward;
    run.rollbacks = hc.rollback_count;
    return run;
}

void write_pg_history_csv(const std::vector<PGEvalRecord>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "batch,mean_reward,mean_advantage,mean_entropy,dev_reward,dev_turn_acc,decision\n";
    char buf[200];
    for (const PGEvalRecord& r : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%s\n", r.batch,
                      r.mean_reward, r.mean_advantage, r.mean_entropy, r.dev_reward, r.dev_turn_acc,
                      r.decision.c_str());
        out << buf;
    }
}

}  // namespace dstlab
