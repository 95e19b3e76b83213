#pragma once

#include <string>

#include <json.hpp>

#include "dstlab/tracker.hpp"

namespace dstlab {

// Versioned binary container: magic, version, a JSON header (model config,
// embedding spec, metadata), then named parameter tensors as raw little-endian
// 64-bit floats. Round trips are bit-exact.
struct Checkpoint {
    ModelConfig config;
    EmbeddingSpec embeddings;
    ModelParams params;
    nlohmann::json metadata;
};

void save_checkpoint(const std::string& path, const Tracker& tracker,
                     const nlohmann::json& metadata);

Checkpoint load_checkpoint(const std::string& path);

// Rebuilds a tracker; the domain still has to be bound by the caller.
Tracker tracker_from_checkpoint(const Checkpoint& ckpt);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json embedding_spec_to_json(const EmbeddingSpec& spec);
EmbeddingSpec embedding_spec_from_json(const nlohmann::json& j);

}  // namespace dstlab
