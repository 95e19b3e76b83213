#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dstlab/rng.hpp"
#include "dstlab/tape.hpp"
#include "dstlab/tensor.hpp"

namespace dstlab {

// Fixed word vectors; never part of the trainable parameter set. Hash mode
// derives a unit-norm vector per token from a seeded PRNG, file mode reads
// "token v1 v2 ... vDim" lines and falls back to hash mode for OOV tokens.
struct EmbeddingSpec {
    enum class Mode { kHash, kFile };
    Mode mode = Mode::kHash;
    int dim = 400;
    std::uint64_t seed = 7;
    std::string path;
};

class EmbeddingTable {
public:
    explicit EmbeddingTable(EmbeddingSpec spec);

    const EmbeddingSpec& spec() const { return spec_; }
    int dim() const { return spec_.dim; }

    const Tensor& word(const std::string& token) const;

    // Arithmetic mean of member vectors; empty token list gives a zero vector.
    Tensor phrase(std::span<const std::string> tokens) const;

private:
    EmbeddingSpec spec_;
    mutable std::unordered_map<std::string, Tensor> cache_;
};

// Slot/value names are embedded as phrases; "dom0-aspect1" splits into
// ["dom0", "aspect1"].
std::vector<std::string> split_name_tokens(const std::string& name);

// Trainable projections applied to n-gram word-vector averages: K receptors
// per scale n in 1..N, each affine + ReLU, mean-pooled over positions.
struct ReceptorBank {
    int ngram_order = 3;
    int receptors = 3;
    int in_dim = 0;
    int out_dim = 0;
    std::vector<Tensor> w;  // N*K matrices [out_dim x in_dim], index n*K + k
    std::vector<Tensor> b;  // N*K vectors [out_dim]

    static ReceptorBank init(int ngram_order, int receptors, int in_dim, int out_dim, Rng& rng);
    int output_dim() const { return ngram_order * receptors * out_dim; }
};

struct ReceptorBankNodes {
    std::vector<NodeId> w, b;
};

ReceptorBankNodes bind_bank(Tape& tape, const ReceptorBank& bank);

// Concatenation over scales and receptors of mean-pooled ReLU(W m + b) where
// m runs over the scale's n-gram mean vectors. Scales longer than the
// utterance contribute zero blocks; an empty utterance gives the zero vector.
NodeId ngram_utterance_repr(Tape& tape, const EmbeddingTable& table, const ReceptorBank& bank,
                            const ReceptorBankNodes& nodes, std::span<const std::string> tokens);

// Value-level convenience for tests and decoding paths.
Tensor ngram_utterance_repr_value(const EmbeddingTable& table, const ReceptorBank& bank,
                                  std::span<const std::string> tokens);

}  // namespace dstlab
