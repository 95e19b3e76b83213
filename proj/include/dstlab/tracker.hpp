#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dstlab/corpus.hpp"
#include "dstlab/embeddings.hpp"
#include "dstlab/tape.hpp"
#include "dstlab/tensor.hpp"

namespace dstlab {

struct ModelConfig {
    int embedding_dim = 400;
    int receptor_dim = 64;
    int ngram_order = 3;
    int receptors_per_scale = 3;
    int gru_hidden = 200;
    std::uint64_t init_seed = 1;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// All trainable tensors. Slots and values enter the model only as embedded
// text, so this set is invariant to the ontology.
struct ModelParams {
    ReceptorBank user_bank, sys_bank;
    Tensor turn_w1, turn_b1, turn_w2, turn_b2;
    Tensor gate_w, gate_b;
    Tensor presence_temp, value_temp;  // learned scalars on cosine scores
    Tensor gru_wz, gru_uz, gru_bz;
    Tensor gru_wr, gru_ur, gru_br;
    Tensor gru_wh, gru_uh, gru_bh;
    Tensor value_w, value_b;

    static ModelParams init(const ModelConfig& cfg);
    static ModelParams zeros(const ModelConfig& cfg);

    void for_each(const std::function<void(const std::string&, Tensor&)>& f);
    void for_each(const std::function<void(const std::string&, const Tensor&)>& f) const;
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    std::size_t scalar_count() const;
    bool bit_equal(const ModelParams& o) const;
};

// One domain's slot list and candidate values, in ontology order.
struct DomainOntology {
    std::string domain;
    std::vector<std::string> slots;
    std::vector<std::vector<std::string>> values;

    static DomainOntology from(const Ontology& ontology, const std::string& domain);
    int slot_index(const std::string& slot) const;
    int value_index(int slot, const std::string& value) const;
};

struct TurnPrediction {
    std::vector<double> presence;                 // per slot, in [0,1]
    std::vector<std::vector<double>> value_dist;  // per slot, sums to 1
};

// Live graph handles for one turn's prediction.
struct TurnNodes {
    std::vector<NodeId> presence;
    std::vector<NodeId> value_dist;
};

struct TrackerState {
    Tensor h;
    int gru_updates = 0;
};

// The tracker: encodes each turn with separate user/system receptor banks,
// gates the turn vector per slot, scores presence against slot embeddings,
// advances one dialogue-level GRU per turn, and scores candidate values
// against a projection of the hidden state.
class Tracker {
public:
    Tracker(ModelConfig cfg, ModelParams params, EmbeddingSpec embedding_spec);

    // Swaps the active ontology; parameters are untouched.
    void bind_domain(const Ontology& ontology, const std::string& domain);

    const ModelConfig& config() const { return cfg_; }
    const DomainOntology& domain() const { return domain_; }
    const EmbeddingTable& table() const { return table_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }

    struct Binding {
        ReceptorBankNodes user_bank, sys_bank;
        NodeId turn_w1, turn_b1, turn_w2, turn_b2;
        NodeId gate_w, gate_b, presence_temp, value_temp;
        GruNodes gru;
        NodeId value_w, value_b;
        std::vector<NodeId> slot_emb;                   // constants, not trained
        std::vector<std::vector<NodeId>> value_emb;     // constants, not trained
        std::vector<NodeId> trainable;                  // same order as ModelParams::for_each
    };

    Binding bind(Tape& tape) const;

    NodeId encode_turn(Tape& tape, const Binding& b,
                       std::span<const std::string> user_tokens,
                       std::span<const std::string> system_tokens) const;

    // Presence from the slot-gated turn vector; one GRU update per turn after
    // all slots are processed; value distributions from the post-GRU feature.
    TurnNodes track_turn(Tape& tape, const Binding& b, NodeId turn_vec, NodeId& h,
                         int* gru_updates = nullptr) const;

    std::vector<TurnNodes> forward_on_tape(Tape& tape, const Binding& b, const Dialogue& d,
                                           TrackerState* state_out = nullptr) const;

    std::vector<TurnPrediction> forward_dialogue(const Dialogue& d,
                                                 TrackerState* state_out = nullptr) const;

    TurnPrediction prediction_values(const Tape& tape, const TurnNodes& nodes) const;

private:
    ModelConfig cfg_;
    ModelParams params_;
    EmbeddingTable table_;
    DomainOntology domain_;
    std::vector<Tensor> slot_emb_;
    std::vector<std::vector<Tensor>> value_emb_;
};

std::vector<SlotValue> decode_turn(const TurnPrediction& pred, const DomainOntology& dom,
                                   double threshold = 0.5);

BeliefState decode_final_belief(const std::vector<TurnPrediction>& preds, const DomainOntology& dom,
                                double threshold = 0.5);

}  // namespace dstlab
