#include "dstlab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dstlab {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'S', 'T', 'L', 'A', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.write(buf, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.write(buf, 8);
}

std::uint32_t read_u32(std::istream& in) {
    char buf[4];
    in.read(buf, 4);
    std::uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    std::uint64_t v;
    std::memcpy(&v, buf, 8);
    return v;
}

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["embedding_dim"] = cfg.embedding_dim;
    j["receptor_dim"] = cfg.receptor_dim;
    j["ngram_order"] = cfg.ngram_order;
    j["receptors_per_scale"] = cfg.receptors_per_scale;
    j["gru_hidden"] = cfg.gru_hidden;
    j["init_seed"] = cfg.init_seed;
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
    cfg.receptor_dim = j.value("receptor_dim", cfg.receptor_dim);
    cfg.ngram_order = j.value("ngram_order", cfg.ngram_order);
    cfg.receptors_per_scale = j.value("receptors_per_scale", cfg.receptors_per_scale);
    cfg.gru_hidden = j.value("gru_hidden", cfg.gru_hidden);
    cfg.init_seed = j.value("init_seed", cfg.init_seed);
    return cfg;
}

json embedding_spec_to_json(const EmbeddingSpec& spec) {
    json j;
    j["mode"] = spec.mode == EmbeddingSpec::Mode::kHash ? "hash" : "file";
    j["dim"] = spec.dim;
    j["seed"] = spec.seed;
    if (!spec.path.empty()) j["path"] = spec.path;
    return j;
}

EmbeddingSpec embedding_spec_from_json(const json& j) {
    EmbeddingSpec spec;
    const std::string mode = j.value("mode", "hash");
    if (mode == "hash") {
        spec.mode = EmbeddingSpec::Mode::kHash;
    } else if (mode == "file") {
        spec.mode = EmbeddingSpec::Mode::kFile;
    } else {
        throw std::runtime_error("embeddings: unknown mode '" + mode + "'");
    }
    spec.dim = j.value("dim", spec.dim);
    spec.seed = j.value("seed", spec.seed);
    spec.path = j.value("path", std::string());
    return spec;
}

void save_checkpoint(const std::string& path, const Tracker& tracker, const json& metadata) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");

    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);

    json header;
    header["model"] = model_config_to_json(tracker.config());
    header["embeddings"] = embedding_spec_to_json(tracker.table().spec());
    header["metadata"] = metadata;
    const std::string hs = header.dump();
    write_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    std::uint32_t count = 0;
    tracker.params().for_each([&](const std::string&, const Tensor&) { ++count; });
    write_u32(out, count);
    tracker.params().for_each([&](const std::string& name, const Tensor& t) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::int64_t d : t.shape()) write_u64(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * 8));
    });
    if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("checkpoint: '" + path + "' is not a checkpoint file");
    }
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: '" + path + "' has unsupported version " +
                                 std::to_string(version));
    }
    const std::uint64_t hlen = read_u64(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint: corrupt header in '" + path + "': " + e.what());
    }

    Checkpoint ckpt;
    ckpt.config = model_config_from_json(header.at("model"));
    ckpt.embeddings = embedding_spec_from_json(header.at("embeddings"));
    ckpt.metadata = header.value("metadata", json::object());
    ckpt.params = ModelParams::zeros(ckpt.config);

    const std::uint32_t count = read_u32(in);
    std::uint32_t seen = 0;
    std::vector<std::pair<std::string, Tensor*>> by_name;
    ckpt.params.for_each([&](const std::string& name, Tensor& t) { by_name.emplace_back(name, &t); });
    if (count != by_name.size()) {
        throw std::runtime_error("checkpoint: '" + path + "' holds " + std::to_string(count) +
                                 " tensors, expected " + std::to_string(by_name.size()));
    }
    for (; seen < count; ++seen) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(in);
        std::vector<std::int64_t> shape;
        std::int64_t total = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape.push_back(static_cast<std::int64_t>(read_u64(in)));
            total *= shape.back();
        }
        if (!in) throw std::runtime_error("checkpoint: truncated tensor header in '" + path + "'");
        Tensor* dst = nullptr;
        for (auto& [n, t] : by_name) {
            if (n == name) dst = t;
        }
        if (dst == nullptr) {
            throw std::runtime_error("checkpoint: unexpected tensor '" + name + "' in '" + path + "'");
        }
        if (dst->shape() != shape) {
            throw std::runtime_error("checkpoint: tensor '" + name + "' has mismatched shape");
        }
        in.read(reinterpret_cast<char*>(dst->data()), total * 8);
        if (!in) throw std::runtime_error("checkpoint: truncated tensor data in '" + path + "'");
    }
    return ckpt;
}

Tracker tracker_from_checkpoint(const Checkpoint& ckpt) {
    return Tracker(ckpt.config, ckpt.params, ckpt.embeddings);
}

}  // namespace dstlab
