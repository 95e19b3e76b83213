#include "dstlab/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dstlab/kernels.hpp"

namespace dstlab {

namespace {

Tensor hash_vector(const std::string& token, const EmbeddingSpec& spec) {
    Rng rng(derive_stream(spec.seed, token));
    Tensor v = Tensor::zeros({spec.dim});
    double norm_sq = 0.0;
    for (int i = 0; i < spec.dim; ++i) {
        const double x = rng.normal();
        v[static_cast<std::size_t>(i)] = x;
        norm_sq += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int i = 0; i < spec.dim; ++i) v[static_cast<std::size_t>(i)] *= inv;
    return v;
}

}  // namespace

EmbeddingTable::EmbeddingTable(EmbeddingSpec spec) : spec_(std::move(spec)) {
    if (spec_.dim <= 0) {
        throw std::invalid_argument("embeddings: dim must be positive");
    }
    if (spec_.mode == EmbeddingSpec::Mode::kFile) {
        std::ifstream in(spec_.path);
        if (!in) {
            throw std::runtime_error("embeddings: cannot open '" + spec_.path + "'");
        }
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string token;
            ss >> token;
            Tensor v = Tensor::zeros({spec_.dim});
            for (int i = 0; i < spec_.dim; ++i) {
                if (!(ss >> v[static_cast<std::size_t>(i)])) {
                    throw std::runtime_error("embeddings: line " + std::to_string(lineno) +
                                             " of '" + spec_.path + "' has fewer than " +
                                             std::to_string(spec_.dim) + " values");
                }
            }
            cache_.emplace(std::move(token), std::move(v));
        }
    }
}

const Tensor& EmbeddingTable::word(const std::string& token) const {
    auto it = cache_.find(token);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(token, hash_vector(token, spec_)).first->second;
}

Tensor EmbeddingTable::phrase(std::span<const std::string> tokens) const {
    Tensor out = Tensor::zeros({spec_.dim});
    if (tokens.empty()) return out;
    const auto& K = kernels::active();
    for (const std::string& t : tokens) {
        K.axpy(1.0, word(t).data(), out.data(), static_cast<std::size_t>(spec_.dim));
    }
    const double inv = 1.0 / static_cast<double>(tokens.size());
    K.scale(out.data(), inv, out.data(), static_cast<std::size_t>(spec_.dim));
    return out;
}

std::vector<std::string> split_name_tokens(const std::string& name) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : name) {
        if (c == '-' || c == '_' || c == ' ' || c == '\t') {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

ReceptorBank ReceptorBank::init(int ngram_order, int receptors, int in_dim, int out_dim, Rng& rng) {
    if (ngram_order < 1 || receptors < 1 || in_dim < 1 || out_dim < 1) {
        throw std::invalid_argument("receptor bank: all dimensions must be >= 1");
    }
    ReceptorBank bank;
    bank.ngram_order = ngram_order;
    bank.receptors = receptors;
    bank.in_dim = in_dim;
    bank.out_dim = out_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (int i = 0; i < ngram_order * receptors; ++i) {
        Tensor w = Tensor::zeros({out_dim, in_dim});
        for (std::int64_t j = 0; j < w.size(); ++j) {
            w[static_cast<std::size_t>(j)] = scale * rng.normal();
        }
        bank.w.push_back(std::move(w));
        Tensor b = Tensor::zeros({out_dim});
        b.fill(0.1);
        bank.b.push_back(std::move(b));
    }
    return bank;
}

ReceptorBankNodes bind_bank(Tape& tape, const ReceptorBank& bank) {
    ReceptorBankNodes nodes;
    for (const Tensor& w : bank.w) nodes.w.push_back(tape.leaf(w, true));
    for (const Tensor& b : bank.b) nodes.b.push_back(tape.leaf(b, true));
    return nodes;
}

NodeId ngram_utterance_repr(Tape& tape, const EmbeddingTable& table, const ReceptorBank& bank,
                            const ReceptorBankNodes& nodes, std::span<const std::string> tokens) {
    if (table.dim() != bank.in_dim) {
        throw std::invalid_argument("ngram_utterance_repr: embedding dim does not match bank input dim");
    }
    const int n_tokens = static_cast<int>(tokens.size());
    const Tensor zero_block = Tensor::zeros({bank.out_dim});
    std::vector<NodeId> blocks;

    std::vector<Tensor> word_vecs;
    word_vecs.reserve(tokens.size());
    for (const std::string& t : tokens) word_vecs.push_back(table.word(t));

    for (int n = 1; n <= bank.ngram_order; ++n) {
        // constant n-gram mean vectors for this scale, shared by its receptors
        std::vector<NodeId> grams;
        for (int p = 0; p + n <= n_tokens; ++p) {
            Tensor m = Tensor::zeros({bank.in_dim});
            const auto& K = kernels::active();
            for (int q = 0; q < n; ++q) {
                K.axpy(1.0, word_vecs[static_cast<std::size_t>(p + q)].data(), m.data(),
                       static_cast<std::size_t>(bank.in_dim));
            }
            K.scale(m.data(), 1.0 / n, m.data(), static_cast<std::size_t>(bank.in_dim));
            grams.push_back(tape.leaf(m));
        }
        for (int k = 0; k < bank.receptors; ++k) {
            const std::size_t idx = static_cast<std::size_t>((n - 1) * bank.receptors + k);
            if (grams.empty()) {
                blocks.push_back(tape.leaf(zero_block));
                continue;
            }
            std::vector<NodeId> outputs;
            outputs.reserve(grams.size());
            for (NodeId g : grams) {
                outputs.push_back(tape.relu(tape.add(tape.matvec(nodes.w[idx], g), nodes.b[idx])));
            }
            blocks.push_back(tape.mean_nodes(outputs));
        }
    }
    return tape.concat(blocks);
}

Tensor ngram_utterance_repr_value(const EmbeddingTable& table, const ReceptorBank& bank,
                                  std::span<const std::string> tokens) {
    Tape tape;
    ReceptorBankNodes nodes = bind_bank(tape, bank);
    return tape.value_tensor(ngram_utterance_repr(tape, table, bank, nodes, tokens));
}

}  // namespace dstlab
