// Command-line driver: corpus generation, supervised pretraining, evaluation,
// policy-gradient fine-tuning, the transfer matrix and the weak-supervision
// curve. All commands are deterministic given their seeds.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dstlab/checkpoint.hpp"
#include "dstlab/corpus.hpp"
#include "dstlab/eval.hpp"
#include "dstlab/kernels.hpp"
#include "dstlab/policy_gradient.hpp"
#include "dstlab/supervised.hpp"

using namespace dstlab;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    json j;
    in >> j;
    return j;
}

struct FullConfig {
    ModelConfig model;
    EmbeddingSpec embeddings;
    TrainConfig train;
    PGConfig pg;
    json raw = json::object();
};

FullConfig parse_config(const std::string& path) {
    FullConfig cfg;
    cfg.embeddings.dim = 0;  // mark unset; defaults to the model dim below
    if (!path.empty()) {
        cfg.raw = load_json_file(path);
        if (cfg.raw.contains("model")) cfg.model = model_config_from_json(cfg.raw["model"]);
        if (cfg.raw.contains("embeddings")) cfg.embeddings = embedding_spec_from_json(cfg.raw["embeddings"]);
        if (cfg.raw.contains("train")) {
            const json& t = cfg.raw["train"];
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.early_stop_patience_epochs =
                t.value("early_stop_patience_epochs", cfg.train.early_stop_patience_epochs);
            cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
            cfg.train.seed = t.value("seed", cfg.train.seed);
        }
        if (cfg.raw.contains("pg")) {
            const json& p = cfg.raw["pg"];
            cfg.pg.batch_size = p.value("batch_size", cfg.pg.batch_size);
            cfg.pg.eval_every_batches = p.value("eval_every_batches", cfg.pg.eval_every_batches);
            cfg.pg.rollback_patience = p.value("rollback_patience", cfg.pg.rollback_patience);
            cfg.pg.entropy_weight = p.value("entropy_weight", cfg.pg.entropy_weight);
            cfg.pg.learning_rate = p.value("learning_rate", cfg.pg.learning_rate);
            cfg.pg.max_batches = p.value("max_batches", cfg.pg.max_batches);
            cfg.pg.presence_threshold = p.value("presence_threshold", cfg.pg.presence_threshold);
            cfg.pg.seed = p.value("seed", cfg.pg.seed);
            cfg.pg.sample_presence = p.value("sample_presence", cfg.pg.sample_presence);
        }
    }
    if (cfg.embeddings.dim == 0) cfg.embeddings.dim = cfg.model.embedding_dim;
    return cfg;
}

json pg_config_to_json(const PGConfig& c) {
    json j;
    j["batch_size"] = c.batch_size;
    j["eval_every_batches"] = c.eval_every_batches;
    j["rollback_patience"] = c.rollback_patience;
    j["entropy_weight"] = c.entropy_weight;
    j["learning_rate"] = c.learning_rate;
    j["max_batches"] = c.max_batches;
    j["presence_threshold"] = c.presence_threshold;
    j["seed"] = c.seed;
    j["sample_presence"] = c.sample_presence;
    return j;
}

json train_config_to_json(const TrainConfig& c) {
    json j;
    j["learning_rate"] = c.learning_rate;
    j["batch_size"] = c.batch_size;
    j["early_stop_patience_epochs"] = c.early_stop_patience_epochs;
    j["max_epochs"] = c.max_epochs;
    j["seed"] = c.seed;
    return j;
}

std::vector<const Dialogue*> split_or_fail(const Corpus& corpus, const std::string& split,
                                           const std::string& domain) {
    auto out = corpus.split_for(split, domain);
    if (out.empty()) {
        throw std::runtime_error("no '" + domain + "' dialogues in the " + split + " split");
    }
    return out;
}

int cmd_gen_corpus(const SyntheticSpec& spec, const std::string& out_path) {
    Corpus corpus = generate_synthetic_corpus(spec);
    save_corpus(corpus, out_path);
    std::cout << "wrote " << out_path << ": " << spec.domains << " domains, "
              << corpus.train.size() << " train / " << corpus.dev.size() << " dev / "
              << corpus.test.size() << " test dialogues\n";
    return 0;
}

int cmd_pretrain(const std::string& corpus_path, const std::string& domain,
                 const std::string& config_path, const std::string& out_path) {
    FullConfig cfg = parse_config(config_path);
    Corpus corpus = load_corpus(corpus_path);
    Tracker model(cfg.model, ModelParams::init(cfg.model), cfg.embeddings);
    model.bind_domain(corpus.ontology, domain);
    TrainResult result = train_supervised(model, corpus, cfg.train);

    json meta;
    meta["domain"] = domain;
    meta["seed"] = cfg.train.seed;
    meta["epoch"] = result.history.best_epoch;
    meta["dev_metric"] = result.history.best_dev_jga;
    meta["train"] = train_config_to_json(cfg.train);
    save_checkpoint(out_path, model, meta);
    write_history_csv(result.history, out_path + ".history.csv");

    std::cout << "pretrained on " << domain << ": " << result.history.epochs.size()
              << " epochs, best dev jga " << result.history.best_dev_jga << " at epoch "
              << result.history.best_epoch << "\n"
              << "checkpoint " << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& corpus_path,
                 const std::string& domain, const std::string& metric, const std::string& split,
                 const std::string& out_path) {
    Checkpoint ckpt = load_checkpoint(model_path);
    Tracker model = tracker_from_checkpoint(ckpt);
    Corpus corpus = load_corpus(corpus_path);
    model.bind_domain(corpus.ontology, domain);
    auto dialogues = split_or_fail(corpus, split, domain);
    auto span = std::span<const Dialogue* const>(dialogues.data(), dialogues.size());

    std::ostringstream table;
    table << "metric,value\n";
    char buf[64];
    auto emit = [&](const char* name, double v) {
        std::snprintf(buf, sizeof(buf), "%s,%.10g\n", name, v);
        table << buf;
    };
    if (metric.empty() || metric == "turn-acc") emit("turn-acc", turn_level_accuracy(model, span));
    if (metric.empty() || metric == "jga") emit("jga", joint_goal_accuracy(model, span));
    if (metric.empty() || metric == "reward") emit("reward", mean_greedy_reward(model, span));

    std::cout << table.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << table.str();
    }
    return 0;
}

int cmd_finetune_pg(const std::string& model_path, const std::string& corpus_path,
                    const std::string& target, const std::string& config_path,
                    const std::string& out_path) {
    FullConfig cfg = parse_config(config_path);
    Checkpoint ckpt = load_checkpoint(model_path);
    Tracker model = tracker_from_checkpoint(ckpt);
    Corpus corpus = load_corpus(corpus_path);
    PGRun run = finetune_pg(model, corpus, target, cfg.pg);

    json meta;
    meta["domain"] = target;
    meta["seed"] = cfg.pg.seed;
    meta["epoch"] = static_cast<int>(run.history.size());
    meta["dev_metric"] = run.best_dev_reward;
    meta["pg"] = pg_config_to_json(cfg.pg);
    meta["pretrained_from"] = ckpt.metadata.value("domain", std::string());
    save_checkpoint(out_path, model, meta);
    write_pg_history_csv(run.history, out_path + ".history.csv");

    std::cout << "fine-tuned on " << target << ": " << (run.history.empty() ? 0 : run.history.back().batch)
              << " batches, best dev reward " << run.best_dev_reward << ", rollbacks "
              << run.rollbacks << "\n"
              << "checkpoint " << out_path << "\n";
    return 0;
}

int cmd_finetune_weak(const std::string& model_path, const std::string& corpus_path,
                      const std::string& target, int samples, const std::string& config_path,
                      const std::string& out_path) {
    FullConfig cfg = parse_config(config_path);
    Checkpoint ckpt = load_checkpoint(model_path);
    Tracker model = tracker_from_checkpoint(ckpt);
    Corpus corpus = load_corpus(corpus_path);
    model.bind_domain(corpus.ontology, target);

    auto train = split_or_fail(corpus, "train", target);
    if (samples < 1 || static_cast<std::size_t>(samples) > train.size()) {
        throw std::runtime_error("--samples must be in [1, " + std::to_string(train.size()) + "]");
    }
    Rng rng(derive_stream(cfg.train.seed, "weak-shuffle"));
    rng.shuffle(train);
    train.resize(static_cast<std::size_t>(samples));
    auto dev = corpus.split_for("dev", target);

    TrainResult result = train_supervised(
        model, std::span<const Dialogue* const>(train.data(), train.size()),
        std::span<const Dialogue* const>(dev.data(), dev.size()), cfg.train);

    json meta;
    meta["domain"] = target;
    meta["seed"] = cfg.train.seed;
    meta["epoch"] = result.history.best_epoch;
    meta["dev_metric"] = result.history.best_dev_jga;
    meta["weak_samples"] = samples;
    meta["train"] = train_config_to_json(cfg.train);
    save_checkpoint(out_path, model, meta);
    write_history_csv(result.history, out_path + ".history.csv");

    std::cout << "weak fine-tune on " << target << " with " << samples << " dialogues, best dev jga "
              << result.history.best_dev_jga << "\n"
              << "checkpoint " << out_path << "\n";
    return 0;
}

int cmd_transfer_matrix(const std::string& corpus_path, const std::string& train_config_path,
                        const std::string& pg_config_path, std::uint64_t seed,
                        const std::string& out_dir) {
    FullConfig tcfg = parse_config(train_config_path);
    FullConfig pcfg = parse_config(pg_config_path);
    Corpus corpus = load_corpus(corpus_path);
    std::filesystem::create_directories(out_dir);

    TransferMatrix m = run_setup_matrix(corpus, tcfg.model, tcfg.embeddings, tcfg.train, pcfg.pg, seed);
    write_matrix_csv(m, out_dir + "/matrix.csv");

    json echo;
    echo["seed"] = seed;
    echo["model"] = model_config_to_json(tcfg.model);
    echo["embeddings"] = embedding_spec_to_json(tcfg.embeddings);
    echo["train"] = train_config_to_json(tcfg.train);
    echo["pg"] = pg_config_to_json(pcfg.pg);
    std::ofstream(out_dir + "/config.json") << echo.dump(1) << "\n";

    std::ostringstream summary;
    summary << "transfer matrix (" << m.domains.size() << " domains); rows = pretrain source\n";
    summary << "source -> target: bl / pg\n";
    for (const auto& c : m.cells) {
        summary << "  " << c.source << " -> " << c.target << ": " << c.bl_accuracy << " / "
                << c.pg_accuracy << (c.source == c.target ? "  (in-domain)" : "") << "\n";
    }
    for (const auto& c : m.averages) {
        summary << "  averages -> " << c.target << ": " << c.bl_accuracy << " / " << c.pg_accuracy
                << "\n";
    }
    std::ofstream(out_dir + "/summary.txt") << summary.str();
    std::cout << summary.str();
    return 0;
}

int cmd_weak_curve(const std::string& model_path, const std::string& corpus_path,
                   const std::string& target, const std::string& sizes_arg,
                   const std::string& config_path, const std::string& out_dir) {
    FullConfig cfg = parse_config(config_path);
    Checkpoint ckpt = load_checkpoint(model_path);
    Tracker pretrained = tracker_from_checkpoint(ckpt);
    Corpus corpus = load_corpus(corpus_path);
    pretrained.bind_domain(corpus.ontology, target);

    std::vector<int> sizes;
    std::stringstream ss(sizes_arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) sizes.push_back(std::stoi(item));
    }
    if (sizes.empty()) throw std::runtime_error("--sizes must list at least one size");

    std::filesystem::create_directories(out_dir);
    auto curve = run_weak_supervision_curve(pretrained, corpus, target,
                                            std::span<const int>(sizes.data(), sizes.size()),
                                            cfg.train, cfg.pg, cfg.train.seed);
    write_curve_csv(std::span<const CurvePoint>(curve.data(), curve.size()), out_dir + "/curve.csv");

    std::ostringstream summary;
    summary << "weak supervision curve on " << target << "\n";
    for (const auto& p : curve) {
        summary << "  s=" << p.samples << ": weak " << p.weak_accuracy << ", pg " << p.pg_accuracy
                << " (gain " << p.pg_accuracy - p.weak_accuracy << ")\n";
    }
    std::ofstream(out_dir + "/summary.txt") << summary.str();
    std::cout << summary.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dialogue state tracking transfer lab"};
    app.require_subcommand(1);

    std::string kernels_backend;
    app.add_option("--kernels", kernels_backend, "force kernel backend: scalar|avx2|auto");

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
    SyntheticSpec spec;
    std::string gen_out;
    gen->add_option("--domains", spec.domains);
    gen->add_option("--slots", spec.slots_per_domain);
    gen->add_option("--values", spec.values_per_slot);
    gen->add_option("--dialogues", spec.dialogues_per_domain);
    gen->add_option("--turns", spec.turns_per_dialogue);
    gen->add_option("--overlap", spec.overlap);
    gen->add_option("--seed", spec.seed);
    gen->add_option("--out", gen_out)->required();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "turn-level supervised pretraining");
    std::string pre_corpus, pre_domain, pre_config, pre_out;
    pre->add_option("--corpus", pre_corpus)->required();
    pre->add_option("--domain", pre_domain)->required();
    pre->add_option("--config", pre_config);
    pre->add_option("--out", pre_out)->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint");
    std::string ev_model, ev_corpus, ev_domain, ev_metric, ev_split = "test", ev_out;
    ev->add_option("--model", ev_model)->required();
    ev->add_option("--corpus", ev_corpus)->required();
    ev->add_option("--domain", ev_domain)->required();
    ev->add_option("--metric", ev_metric)->check(CLI::IsMember({"turn-acc", "jga", "reward"}));
    ev->add_option("--split", ev_split)->check(CLI::IsMember({"train", "dev", "test"}));
    ev->add_option("--out", ev_out);

    // finetune-pg
    auto* fpg = app.add_subcommand("finetune-pg", "policy-gradient fine-tuning from dialogue rewards");
    std::string fpg_model, fpg_corpus, fpg_target, fpg_config, fpg_out;
    fpg->add_option("--model", fpg_model)->required();
    fpg->add_option("--corpus", fpg_corpus)->required();
    fpg->add_option("--target-domain", fpg_target)->required();
    fpg->add_option("--config", fpg_config);
    fpg->add_option("--out", fpg_out)->required();

    // finetune-weak
    auto* fw = app.add_subcommand("finetune-weak", "turn-level fine-tuning on a dialogue subset");
    std::string fw_model, fw_corpus, fw_target, fw_config, fw_out;
    int fw_samples = 10;
    fw->add_option("--model", fw_model)->required();
    fw->add_option("--corpus", fw_corpus)->required();
    fw->add_option("--target-domain", fw_target)->required();
    fw->add_option("--samples", fw_samples)->required();
    fw->add_option("--config", fw_config);
    fw->add_option("--out", fw_out)->required();

    // transfer-matrix
    auto* tm = app.add_subcommand("transfer-matrix", "the full cross-domain transfer protocol");
    std::string tm_corpus, tm_train_config, tm_pg_config, tm_out;
    std::uint64_t tm_seed = 1;
    tm->add_option("--corpus", tm_corpus)->required();
    tm->add_option("--train-config", tm_train_config);
    tm->add_option("--pg-config", tm_pg_config);
    tm->add_option("--seed", tm_seed);
    tm->add_option("--out", tm_out)->required();

    // weak-curve
    auto* wc = app.add_subcommand("weak-curve", "weak supervision vs reward-only fine-tuning");
    std::string wc_model, wc_corpus, wc_target, wc_sizes = "10,20,30,40,50", wc_config, wc_out;
    wc->add_option("--model", wc_model)->required();
    wc->add_option("--corpus", wc_corpus)->required();
    wc->add_option("--target-domain", wc_target)->required();
    wc->add_option("--sizes", wc_sizes);
    wc->add_option("--config", wc_config);
    wc->add_option("--out", wc_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!kernels_backend.empty()) kernels::select(kernels_backend);
        if (gen->parsed()) return cmd_gen_corpus(spec, gen_out);
        if (pre->parsed()) return cmd_pretrain(pre_corpus, pre_domain, pre_config, pre_out);
        if (ev->parsed()) return cmd_evaluate(ev_model, ev_corpus, ev_domain, ev_metric, ev_split, ev_out);
        if (fpg->parsed()) return cmd_finetune_pg(fpg_model, fpg_corpus, fpg_target, fpg_config, fpg_out);
        if (fw->parsed()) {
            return cmd_finetune_weak(fw_model, fw_corpus, fw_target, fw_samples, fw_config, fw_out);
        }
        if (tm->parsed()) return cmd_transfer_matrix(tm_corpus, tm_train_config, tm_pg_config, tm_seed, tm_out);
        if (wc->parsed()) return cmd_weak_curve(wc_model, wc_corpus, wc_target, wc_sizes, wc_config, wc_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
