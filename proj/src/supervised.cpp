#include "dstlab/supervised.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "dstlab/eval.hpp"
#include "dstlab/optim.hpp"
#include "dstlab/rng.hpp"

namespace dstlab {

namespace {
constexpr double kProbEps = 1e-12;
}

NodeId clamped_log(Tape& tape, NodeId p) {
    return tape.log(tape.add_const(tape.scale(p, 1.0 - 2.0 * kProbEps), kProbEps));
}

double clamped_log_value(double p) {
    return std::log(p * (1.0 - 2.0 * kProbEps) + kProbEps);
}

NodeId turn_loss(Tape& tape, const TurnNodes& pred, const std::vector<SlotValue>& gold,
                 const DomainOntology& dom) {
    std::set<std::string> gold_slots;
    for (const auto& sv : gold) gold_slots.insert(sv.slot);

    std::vector<NodeId> terms;
    for (std::size_t s = 0; s < dom.slots.size(); ++s) {
        const bool present = gold_slots.contains(dom.slots[s]);
        NodeId p = pred.presence[s];
        if (present) {
            terms.push_back(tape.scale(clamped_log(tape, p), -1.0));
        } else {
            NodeId one_minus = tape.add_const(tape.scale(p, -1.0), 1.0);
            terms.push_back(tape.scale(clamped_log(tape, one_minus), -1.0));
        }
    }
    for (const auto& sv : gold) {
        const int s = dom.slot_index(sv.slot);
        if (s < 0) {
            throw std::invalid_argument("turn_loss: slot '" + sv.slot + "' not in ontology");
        }
        const int j = dom.value_index(s, sv.value);
        if (j < 0) {
            throw std::invalid_argument("turn_loss: value '" + sv.value +
                                        "' not in ontology for slot '" + sv.slot + "'");
        }
        NodeId pj = tape.pick(pred.value_dist[static_cast<std::size_t>(s)], j);
        terms.push_back(tape.scale(clamped_log(tape, pj), -1.0));
    }
    return tape.sum_nodes(terms);
}

double joint_goal_accuracy(const Tracker& model, std::span<const Dialogue* const> dialogues,
                           double threshold) {
    std::int64_t total = 0, correct = 0;
    for (const Dialogue* d : dialogues) {
        auto preds = model.forward_dialogue(*d);
        BeliefState folded;
        for (std::size_t t = 0; t < preds.size(); ++t) {
            folded.apply(decode_turn(preds[t], model.domain(), threshold));
            if (folded == d->turns[t].belief_state) ++correct;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train_supervised(Tracker& model, std::span<const Dialogue* const> train,
                             std::span<const Dialogue* const> dev, const TrainConfig& cfg) {
    if (train.empty()) {
        throw std::invalid_argument("train_supervised: empty train split");
    }
    if (cfg.batch_size < 1 || cfg.learning_rate <= 0 || cfg.max_epochs < 0 ||
        cfg.early_stop_patience_epochs < 1) {
        throw std::invalid_argument("train_supervised: invalid config");
    }
    for (const Dialogue* d : train) {
        if (d->domain != model.domain().domain) {
            throw std::invalid_argument("train_supervised: dialogue '" + d->id +
                                        "' is not in the model's domain");
        }
    }

    TrainResult result;
    if (cfg.max_epochs == 0) return result;

    auto params = model.params().tensors();
    std::vector<const Tensor*> cparams(params.begin(), params.end());
    AdamState opt = make_adam_state(std::span<const Tensor* const>(cparams.data(), cparams.size()));

    Rng shuffle_rng(derive_stream(cfg.seed, "shuffle"));
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    ModelParams best = model.params();
    int stale = 0;
    Tape tape;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::int64_t turns_seen = 0;
        int steps = 0;
        for (std::size_t ofs = 0; ofs < order.size(); ofs += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), ofs + static_cast<std::size_t>(cfg.batch_size));
            tape.reset();
            Tracker::Binding b = model.bind(tape);
            std::vector<NodeId> losses;
            std::int64_t batch_turns = 0;
            for (std::size_t i = ofs; i < end; ++i) {
                const Dialogue& d = *train[order[i]];
                auto nodes = model.forward_on_tape(tape, b, d);
                for (std::size_t t = 0; t < nodes.size(); ++t) {
                    losses.push_back(turn_loss(tape, nodes[t], d.turns[t].turn_label, model.domain()));
                }
                batch_turns += static_cast<std::int64_t>(d.turns.size());
            }
            NodeId total = tape.scale(tape.sum_nodes(losses), 1.0 / static_cast<double>(batch_turns));
            tape.backward(total);

            std::vector<Tensor> grads;
            grads.reserve(b.trainable.size());
            for (NodeId id : b.trainable) grads.push_back(tape.grad_tensor(id));
            adam_step(std::span<Tensor* const>(params.data(), params.size()),
                      std::span<const Tensor>(grads.data(), grads.size()), opt, cfg.learning_rate);

            loss_sum += tape.value_scalar(total) * static_cast<double>(batch_turns);
            turns_seen += batch_turns;
            ++steps;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(turns_seen);
        rec.dev_jga = joint_goal_accuracy(model, dev);
        rec.dev_turn_acc = turn_level_accuracy(model, dev);
        rec.optimizer_steps = steps;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.history.epochs.push_back(rec);

        if (rec.dev_jga > result.history.best_dev_jga) {
            result.history.best_dev_jga = rec.dev_jga;
            result.history.best_epoch = epoch;
            best = model.params();
            stale = 0;
        } else {
            ++stale;
        }
        if (stale >= cfg.early_stop_patience_epochs) break;
    }

    model.params() = best;
    return result;
}

TrainResult train_supervised(Tracker& model, const Corpus& corpus, const TrainConfig& cfg) {
    auto train = corpus.split_for("train", model.domain().domain);
    auto dev = corpus.split_for("dev", model.domain().domain);
    return train_supervised(model, std::span<const Dialogue* const>(train.data(), train.size()),
                            std::span<const Dialogue* const>(dev.data(), dev.size()), cfg);
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "epoch,train_loss,dev_jga,dev_turn_acc,seconds\n";
    char buf[160];
    for (const EpochRecord& r : history.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.3f\n", r.epoch, r.train_loss,
                      r.dev_jga, r.dev_turn_acc, r.seconds);
        out << buf;
    }
}

}  // namespace dstlab
