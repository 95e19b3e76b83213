#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dstlab/corpus.hpp"
#include "dstlab/policy_gradient.hpp"
#include "dstlab/supervised.hpp"
#include "dstlab/tracker.hpp"

namespace dstlab {

// Mean over turns of |gold_label ∩ decoded_turn| / |gold_label|. A turn with
// an empty gold label scores 1 on an empty decode and 0 otherwise.
double turn_level_accuracy(const Tracker& model, std::span<const Dialogue* const> dialogues,
                           double threshold = 0.5);

struct TransferCell {
    std::string source;
    std::string target;
    double bl_accuracy = 0.0;  // zero-shot (off-diagonal) or supervised (diagonal)
    double pg_accuracy = 0.0;  // after policy-gradient fine-tuning
};

struct TransferMatrix {
    std::vector<std::string> domains;
    std::vector<TransferCell> cells;  // row-major: source-major order
    std::vector<TransferCell> averages;  // per target, over sources != target

    const TransferCell& cell(const std::string& source, const std::string& target) const;
};

// The four-setup protocol: per source domain, supervised pretraining; per
// target, zero-shot evaluation and PG fine-tuning; the diagonal holds the
// supervised model and its in-domain PG refinement.
TransferMatrix run_setup_matrix(const Corpus& corpus, const ModelConfig& model_cfg,
                                const EmbeddingSpec& embeddings, const TrainConfig& train_cfg,
                                const PGConfig& pg_cfg, std::uint64_t seed);

void write_matrix_csv(const TransferMatrix& m, const std::string& path);

struct CurvePoint {
    int samples = 0;
    double weak_accuracy = 0.0;  // after turn-level fine-tuning on `samples` dialogues
    double pg_accuracy = 0.0;    // after subsequent reward-only fine-tuning
};

// For each size s: fine-tune the pretrained model with turn-level supervision
// on the first s dialogues of a seeded shuffle of the target train split,
// then fine-tune that model with the dialogue-level reward only.
std::vector<CurvePoint> run_weak_supervision_curve(const Tracker& pretrained, const Corpus& corpus,
                                                   const std::string& target_domain,
                                                   std::span<const int> sizes,
                                                   const TrainConfig& weak_cfg, const PGConfig& pg_cfg,
                                                   std::uint64_t seed);

void write_curve_csv(std::span<const CurvePoint> points, const std::string& path);

}  // namespace dstlab
