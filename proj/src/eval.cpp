#include "dstlab/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace dstlab {

double turn_level_accuracy(const Tracker& model, std::span<const Dialogue* const> dialogues,
                           double threshold) {
    double score_sum = 0.0;
    std::int64_t turns = 0;
    for (const Dialogue* d : dialogues) {
        auto preds = model.forward_dialogue(*d);
        for (std::size_t t = 0; t < preds.size(); ++t) {
            const auto decoded = decode_turn(preds[t], model.domain(), threshold);
            const auto& gold = d->turns[t].turn_label;
            if (gold.empty()) {
                score_sum += decoded.empty() ? 1.0 : 0.0;
            } else {
                std::size_t hit = 0;
                for (const SlotValue& sv : gold) {
                    if (std::find(decoded.begin(), decoded.end(), sv) != decoded.end()) ++hit;
                }
                score_sum += static_cast<double>(hit) / static_cast<double>(gold.size());
            }
            ++turns;
        }
    }
    return turns == 0 ? 0.0 : score_sum / static_cast<double>(turns);
}

const TransferCell& TransferMatrix::cell(const std::string& source, const std::string& target) const {
    for (const TransferCell& c : cells) {
        if (c.source == source && c.target == target) return c;
    }
    throw std::invalid_argument("transfer matrix has no cell " + source + " -> " + target);
}

TransferMatrix run_setup_matrix(const Corpus& corpus, const ModelConfig& model_cfg,
                                const EmbeddingSpec& embeddings, const TrainConfig& train_cfg,
                                const PGConfig& pg_cfg, std::uint64_t seed) {
    TransferMatrix out;
    out.domains = domains_of(corpus);
    if (out.domains.size() < 2) {
        throw std::invalid_argument("run_setup_matrix: need at least 2 domains");
    }

    std::size_t si = 0;
    for (const std::string& source : out.domains) {
        // setup 1: supervised pretraining on the source domain
        ModelConfig cfg = model_cfg;
        cfg.init_seed = derive_stream(seed, "model-init", si);
        Tracker pretrained(cfg, ModelParams::init(cfg), embeddings);
        pretrained.bind_domain(corpus.ontology, source);
        TrainConfig tc = train_cfg;
        tc.seed = derive_stream(seed, "pretrain", si);
        train_supervised(pretrained, corpus, tc);

        std::size_t ti = 0;
        for (const std::string& target : out.domains) {
            TransferCell cell;
            cell.source = source;
            cell.target = target;
            auto test = corpus.split_for("test", target);
            auto test_span = std::span<const Dialogue* const>(test.data(), test.size());

            Tracker model = pretrained;  // parameters are shared by copy, never mutated here
            model.bind_domain(corpus.ontology, target);
            // setup 2 off-diagonal (zero-shot) / setup 1 diagonal (supervised)
            cell.bl_accuracy = turn_level_accuracy(model, test_span, pg_cfg.presence_threshold);

            // setups 3 and 4: reward-only fine-tuning on the target domain
            PGConfig pc = pg_cfg;
            pc.seed = derive_stream(seed, "pg", si * 1000 + ti);
            finetune_pg(model, corpus, target, pc);
            cell.pg_accuracy = turn_level_accuracy(model, test_span, pg_cfg.presence_threshold);

            out.cells.push_back(std::move(cell));
            ++ti;
        }
        ++si;
    }

    for (const std::string& target : out.domains) {
        TransferCell avg;
        avg.source = "averages";
        avg.target = target;
        int n = 0;
        for (const TransferCell& c : out.cells) {
            if (c.target == target && c.source != target) {
                avg.bl_accuracy += c.bl_accuracy;
                avg.pg_accuracy += c.pg_accuracy;
                ++n;
            }
        }
        if (n > 0) {
            avg.bl_accuracy /= n;
            avg.pg_accuracy /= n;
        }
        out.averages.push_back(std::move(avg));
    }
    return out;
}

void write_matrix_csv(const TransferMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "source,target,bl_accuracy,pg_accuracy\n";
    char buf[160];
    auto emit = [&](const TransferCell& c) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%.10g\n", c.source.c_str(), c.target.c_str(),
                      c.bl_accuracy, c.pg_accuracy);
        out << buf;
    };
    for (const TransferCell& c : m.cells) emit(c);
    for (const TransferCell& c : m.averages) emit(c);
}

std::vector<CurvePoint> run_weak_supervision_curve(const Tracker& pretrained, const Corpus& corpus,
                                                   const std::string& target_domain,
                                                   std::span<const int> sizes,
                                                   const TrainConfig& weak_cfg, const PGConfig& pg_cfg,
                                                   std::uint64_t seed) {
    auto train = corpus.split_for("train", target_domain);
    auto dev = corpus.split_for("dev", target_domain);
    auto test = corpus.split_for("test", target_domain);
    for (int s : sizes) {
        if (s < 1 || static_cast<std::size_t>(s) > train.size()) {
            throw std::invalid_argument("run_weak_supervision_curve: size " + std::to_string(s) +
                                        " exceeds the target train split (" +
                                        std::to_string(train.size()) + ")");
        }
    }

    // one seeded shuffle; every size takes a prefix of it
    Rng rng(derive_stream(seed, "weak-shuffle"));
    rng.shuffle(train);

    std::vector<CurvePoint> out;
    auto test_span = std::span<const Dialogue* const>(test.data(), test.size());
    for (int s : sizes) {
        CurvePoint point;
        point.samples = s;

        Tracker model = pretrained;
        model.bind_domain(corpus.ontology, target_domain);
        std::vector<const Dialogue*> subset(train.begin(), train.begin() + s);
        TrainConfig tc = weak_cfg;
        tc.seed = derive_stream(seed, "weak-train", static_cast<std::uint64_t>(s));
        train_supervised(model, std::span<const Dialogue* const>(subset.data(), subset.size()),
                         std::span<const Dialogue* const>(dev.data(), dev.size()), tc);
        point.weak_accuracy = turn_level_accuracy(model, test_span, pg_cfg.presence_threshold);

        PGConfig pc = pg_cfg;
        pc.seed = derive_stream(seed, "weak-pg", static_cast<std::uint64_t>(s));
        finetune_pg(model, corpus, target_domain, pc);
        point.pg_accuracy = turn_level_accuracy(model, test_span, pg_cfg.presence_threshold);

        out.push_back(point);
    }
    return out;
}

void write_curve_csv(std::span<const CurvePoint> points, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "samples,weak_accuracy,pg_accuracy\n";
    char buf[120];
    for (const CurvePoint& p : points) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", p.samples, p.weak_accuracy, p.pg_accuracy);
        out << buf;
    }
}

}  // namespace dstlab
