#include "dstlab/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dstlab {

namespace {

Tensor random_matrix(std::int64_t rows, std::int64_t cols, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        t[static_cast<std::size_t>(i)] = scale * rng.normal();
    }
    return t;
}

Tensor const_vector(std::int64_t n, double v) {
    Tensor t = Tensor::zeros({n});
    t.fill(v);
    return t;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg) {
    Rng rng(derive_stream(cfg.init_seed, "model-init"));
    const std::int64_t e = cfg.embedding_dim;
    const std::int64_t h = cfg.gru_hidden;
    const std::int64_t concat_dim =
        2LL * cfg.ngram_order * cfg.receptors_per_scale * cfg.receptor_dim;

    ModelParams p;
    p.user_bank = ReceptorBank::init(cfg.ngram_order, cfg.receptors_per_scale,
                                     cfg.embedding_dim, cfg.receptor_dim, rng);
    p.sys_bank = ReceptorBank::init(cfg.ngram_order, cfg.receptors_per_scale,
                                    cfg.embedding_dim, cfg.receptor_dim, rng);
    p.turn_w1 = random_matrix(e, concat_dim, rng);
    p.turn_b1 = const_vector(e, 0.1);
    p.turn_w2 = random_matrix(e, e, rng);
    p.turn_b2 = const_vector(e, 0.1);
    p.gate_w = random_matrix(e, e, rng);
    p.gate_b = const_vector(e, 1.0);  // gates start open
    p.presence_temp = Tensor::scalar(10.0);
    p.value_temp = Tensor::scalar(10.0);
    p.gru_wz = random_matrix(h, e, rng);
    p.gru_uz = random_matrix(h, h, rng);
    p.gru_bz = Tensor::zeros({h});
    p.gru_wr = random_matrix(h, e, rng);
    p.gru_ur = random_matrix(h, h, rng);
    p.gru_br = Tensor::zeros({h});
    p.gru_wh = random_matrix(h, e, rng);
    p.gru_uh = random_matrix(h, h, rng);
    p.gru_bh = Tensor::zeros({h});
    p.value_w = random_matrix(e, h, rng);
    p.value_b = const_vector(e, 0.1);
    return p;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
    ModelParams p = init(cfg);
    p.for_each([](const std::string&, Tensor& t) { t.fill(0.0); });
    return p;
}

namespace {

template <typename Self, typename F>
void visit_params(Self& self, F&& f) {
    for (std::size_t i = 0; i < self.user_bank.w.size(); ++i) {
        f("user_bank.w" + std::to_string(i), self.user_bank.w[i]);
        f("user_bank.b" + std::to_string(i), self.user_bank.b[i]);
    }
    for (std::size_t i = 0; i < self.sys_bank.w.size(); ++i) {
        f("sys_bank.w" + std::to_string(i), self.sys_bank.w[i]);
        f("sys_bank.b" + std::to_string(i), self.sys_bank.b[i]);
    }
    f("turn_w1", self.turn_w1);
    f("turn_b1", self.turn_b1);
    f("turn_w2", self.turn_w2);
    f("turn_b2", self.turn_b2);
    f("gate_w", self.gate_w);
    f("gate_b", self.gate_b);
    f("presence_temp", self.presence_temp);
    f("value_temp", self.value_temp);
    f("gru_wz", self.gru_wz);
    f("gru_uz", self.gru_uz);
    f("gru_bz", self.gru_bz);
    f("gru_wr", self.gru_wr);
    f("gru_ur", self.gru_ur);
    f("gru_br", self.gru_br);
    f("gru_wh", self.gru_wh);
    f("gru_uh", self.gru_uh);
    f("gru_bh", self.gru_bh);
    f("value_w", self.value_w);
    f("value_b", self.value_b);
}

}  // namespace

void ModelParams::for_each(const std::function<void(const std::string&, Tensor&)>& f) {
    visit_params(*this, f);
}

void ModelParams::for_each(const std::function<void(const std::string&, const Tensor&)>& f) const {
    visit_params(*this, f);
}

std::vector<Tensor*> ModelParams::tensors() {
    std::vector<Tensor*> out;
    for_each([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
    std::vector<const Tensor*> out;
    for_each([&](const std::string&, const Tensor& t) { out.push_back(&t); });
    return out;
}

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

bool ModelParams::bit_equal(const ModelParams& o) const {
    bool eq = true;
    auto mine = tensors();
    auto theirs = o.tensors();
    if (mine.size() != theirs.size()) return false;
    for (std::size_t i = 0; i < mine.size(); ++i) {
        eq = eq && mine[i]->bit_equal(*theirs[i]);
    }
    return eq;
}

DomainOntology DomainOntology::from(const Ontology& ontology, const std::string& domain) {
    auto it = ontology.domains.find(domain);
    if (it == ontology.domains.end()) {
        throw std::invalid_argument("ontology has no domain '" + domain + "'");
    }
    DomainOntology d;
    d.domain = domain;
    for (const auto& [slot, values] : it->second) {
        if (values.empty()) {
            throw std::invalid_argument("slot '" + slot + "' has an empty candidate list");
        }
        d.slots.push_back(slot);
        d.values.push_back(values);
    }
    return d;
}

int DomainOntology::slot_index(const std::string& slot) const {
    auto it = std::find(slots.begin(), slots.end(), slot);
    return it == slots.end() ? -1 : static_cast<int>(it - slots.begin());
}

int DomainOntology::value_index(int slot, const std::string& value) const {
    const auto& vals = values[static_cast<std::size_t>(slot)];
    auto it = std::find(vals.begin(), vals.end(), value);
    return it == vals.end() ? -1 : static_cast<int>(it - vals.begin());
}

Tracker::Tracker(ModelConfig cfg, ModelParams params, EmbeddingSpec embedding_spec)
    : cfg_(cfg), params_(std::move(params)), table_(std::move(embedding_spec)) {
    if (table_.dim() != cfg_.embedding_dim) {
        throw std::invalid_argument("tracker: embedding table dim does not match model config");
    }
}

void Tracker::bind_domain(const Ontology& ontology, const std::string& domain) {
    domain_ = DomainOntology::from(ontology, domain);
    slot_emb_.clear();
    value_emb_.clear();
    for (std::size_t s = 0; s < domain_.slots.size(); ++s) {
        slot_emb_.push_back(table_.phrase(split_name_tokens(domain_.slots[s])));
        std::vector<Tensor> vals;
        for (const std::string& v : domain_.values[s]) {
            vals.push_back(table_.phrase(split_name_tokens(v)));
        }
        value_emb_.push_back(std::move(vals));
    }
}

Tracker::Binding Tracker::bind(Tape& tape) const {
    if (domain_.slots.empty()) {
        throw std::invalid_argument("tracker: no domain bound");
    }
    Binding b;
    // Leaf creation order matches ModelParams::for_each so gradients can be
    // read back positionally by the optimizers.
    params_.for_each([&](const std::string&, const Tensor& t) {
        b.trainable.push_back(tape.leaf(t, true));
    });
    std::size_t i = 0;
    auto next = [&]() { return b.trainable[i++]; };
    const std::size_t nk = params_.user_bank.w.size();
    for (std::size_t k = 0; k < nk; ++k) {
        b.user_bank.w.push_back(next());
        b.user_bank.b.push_back(next());
    }
    for (std::size_t k = 0; k < nk; ++k) {
        b.sys_bank.w.push_back(next());
        b.sys_bank.b.push_back(next());
    }
    b.turn_w1 = next();
    b.turn_b1 = next();
    b.turn_w2 = next();
    b.turn_b2 = next();
    b.gate_w = next();
    b.gate_b = next();
    b.presence_temp = next();
    b.value_temp = next();
    b.gru.wz = next();
    b.gru.uz = next();
    b.gru.bz = next();
    b.gru.wr = next();
    b.gru.ur = next();
    b.gru.br = next();
    b.gru.wh = next();
    b.gru.uh = next();
    b.gru.bh = next();
    b.value_w = next();
    b.value_b = next();

    for (std::size_t s = 0; s < slot_emb_.size(); ++s) {
        b.slot_emb.push_back(tape.leaf(slot_emb_[s]));
        std::vector<NodeId> vals;
        for (const Tensor& v : value_emb_[s]) vals.push_back(tape.leaf(v));
        b.value_emb.push_back(std::move(vals));
    }
    return b;
}

NodeId Tracker::encode_turn(Tape& tape, const Binding& b,
                            std::span<const std::string> user_tokens,
                            std::span<const std::string> system_tokens) const {
    NodeId u = ngram_utterance_repr(tape, table_, params_.user_bank, b.user_bank, user_tokens);
    NodeId s = ngram_utterance_repr(tape, table_, params_.sys_bank, b.sys_bank, system_tokens);
    const NodeId both[] = {u, s};
    NodeId cat = tape.concat(both);
    NodeId h1 = tape.relu(tape.add(tape.matvec(b.turn_w1, cat), b.turn_b1));
    return tape.relu(tape.add(tape.matvec(b.turn_w2, h1), b.turn_b2));
}

TurnNodes Tracker::track_turn(Tape& tape, const Binding& b, NodeId turn_vec, NodeId& h,
                              int* gru_updates) const {
    TurnNodes out;
    std::vector<NodeId> gated;
    gated.reserve(domain_.slots.size());
    for (std::size_t s = 0; s < domain_.slots.size(); ++s) {
        NodeId gate = tape.add(tape.matvec(b.gate_w, b.slot_emb[s]), b.gate_b);
        NodeId g = tape.mul(turn_vec, gate);
        gated.push_back(g);
        NodeId score = tape.scale_by(tape.cosine(g, b.slot_emb[s]), b.presence_temp);
        out.presence.push_back(tape.sigmoid(score));
    }
    // single GRU update per turn, after all slots are processed
    NodeId pooled = tape.mean_nodes(gated);
    h = gru_cell(tape, pooled, h, b.gru);
    if (gru_updates != nullptr) ++*gru_updates;

    NodeId vfeat = tape.add(tape.matvec(b.value_w, h), b.value_b);
    for (std::size_t s = 0; s < domain_.slots.size(); ++s) {
        if (b.value_emb[s].empty()) {
            throw std::invalid_argument("tracker: slot '" + domain_.slots[s] +
                                        "' has an empty candidate list");
        }
        std::vector<NodeId> scores;
        scores.reserve(b.value_emb[s].size());
        for (NodeId ve : b.value_emb[s]) {
            scores.push_back(tape.scale_by(tape.cosine(vfeat, ve), b.value_temp));
        }
        out.value_dist.push_back(tape.softmax(tape.stack(scores)));
    }
    return out;
}

std::vector<TurnNodes> Tracker::forward_on_tape(Tape& tape, const Binding& b, const Dialogue& d,
                                                TrackerState* state_out) const {
    NodeId h = tape.leaf(Tensor::zeros({cfg_.gru_hidden}));
    int updates = 0;
    std::vector<TurnNodes> out;
    out.reserve(d.turns.size());
    for (const Turn& turn : d.turns) {
        NodeId tv = encode_turn(tape, b, turn.user_utterance, turn.system_utterance);
        out.push_back(track_turn(tape, b, tv, h, &updates));
    }
    if (state_out != nullptr) {
        state_out->h = tape.value_tensor(h);
        state_out->gru_updates = updates;
    }
    return out;
}

std::vector<TurnPrediction> Tracker::forward_dialogue(const Dialogue& d,
                                                      TrackerState* state_out) const {
    Tape tape;
    Binding b = bind(tape);
    std::vector<TurnNodes> nodes = forward_on_tape(tape, b, d, state_out);
    std::vector<TurnPrediction> preds;
    preds.reserve(nodes.size());
    for (const TurnNodes& tn : nodes) preds.push_back(prediction_values(tape, tn));
    return preds;
}

TurnPrediction Tracker::prediction_values(const Tape& tape, const TurnNodes& nodes) const {
    TurnPrediction p;
    for (NodeId id : nodes.presence) p.presence.push_back(tape.value_scalar(id));
    for (NodeId id : nodes.value_dist) {
        auto vals = tape.values(id);
        p.value_dist.emplace_back(vals.begin(), vals.end());
    }
    return p;
}

std::vector<SlotValue> decode_turn(const TurnPrediction& pred, const DomainOntology& dom,
                                   double threshold) {
    std::vector<SlotValue> out;
    for (std::size_t s = 0; s < pred.presence.size(); ++s) {
        if (pred.presence[s] > threshold) {
            const auto& dist = pred.value_dist[s];
            std::size_t best = 0;
            for (std::size_t j = 1; j < dist.size(); ++j) {
                if (dist[j] > dist[best]) best = j;  // ties keep the lowest index
            }
            out.push_back({dom.slots[s], dom.values[s][best]});
        }
    }
    return out;
}

BeliefState decode_final_belief(const std::vector<TurnPrediction>& preds, const DomainOntology& dom,
                                double threshold) {
    BeliefState state;
    for (const TurnPrediction& p : preds) {
        state.apply(decode_turn(p, dom, threshold));
    }
    return state;
}

}  // namespace dstlab
