#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace dstlab {

inline constexpr const char* kDelexToken = "<delex>";

struct SlotValue {
    std::string slot;
    std::string value;
    friend auto operator<=>(const SlotValue&, const SlotValue&) = default;
};

// Accumulated user goal: at most one value per slot, order-free equality.
class BeliefState {
public:
    BeliefState() = default;

    void set(const std::string& slot, const std::string& value) { entries_[slot] = value; }
    void apply(const std::vector<SlotValue>& delta) {
        for (const auto& sv : delta) entries_[sv.slot] = sv.value;
    }
    std::optional<std::string> value_of(const std::string& slot) const {
        auto it = entries_.find(slot);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::map<std::string, std::string>& entries() const { return entries_; }

    std::vector<SlotValue> to_pairs() const {
        std::vector<SlotValue> out;
        out.reserve(entries_.size());
        for (const auto& [s, v] : entries_) out.push_back({s, v});
        return out;
    }

    friend bool operator==(const BeliefState&, const BeliefState&) = default;

private:
    std::map<std::string, std::string> entries_;
};

struct Turn {
    std::vector<std::string> system_utterance;  // empty on the first turn
    std::vector<std::string> user_utterance;
    std::vector<SlotValue> turn_label;  // belief delta, kept sorted
    BeliefState belief_state;           // cumulative gold
};

struct Dialogue {
    std::string id;
    std::string domain;
    std::vector<Turn> turns;
};

struct Ontology {
    // domain -> slot -> candidate values
    std::map<std::string, std::map<std::string, std::vector<std::string>>> domains;

    bool has_slot(const std::string& domain, const std::string& slot) const {
        auto d = domains.find(domain);
        return d != domains.end() && d->second.contains(slot);
    }
};

struct Corpus {
    Ontology ontology;
    std::vector<Dialogue> train, dev, test;

    std::vector<const Dialogue*> split_for(const std::string& split, const std::string& domain) const;
};

// Parse + full validation; errors carry dialogue id and turn index.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);
std::string serialize_corpus(const Corpus& corpus);
void validate_corpus(const Corpus& corpus);

struct DelexPattern {
    std::string name;
    std::regex matcher;
};

// Patterns for the machine-generated surface forms: reference numbers,
// train ids, phone numbers, clock times, postcodes.
const std::vector<DelexPattern>& default_delex_patterns();

std::vector<std::string> delexicalize(const std::vector<std::string>& tokens,
                                      const std::vector<DelexPattern>& patterns);

// Label 0 is state 0; label t is the set of pairs present in state t but not
// in state t-1. Value changes surface with the new value; deletions are not
// representable.
std::vector<std::vector<SlotValue>> derive_turn_labels(const std::vector<BeliefState>& states);

struct SplitRatios {
    double train = 0.8, dev = 0.1, test = 0.1;
};

struct Split {
    std::vector<Dialogue> train, dev, test;
};

Split split_corpus(std::vector<Dialogue> dialogues, SplitRatios ratios, std::uint64_t seed);

struct SyntheticSpec {
    int domains = 2;
    int slots_per_domain = 4;
    int values_per_slot = 6;
    int dialogues_per_domain = 250;
    int turns_per_dialogue = 6;
    double overlap = 0.6;  // fraction of slot-surface/value/filler tokens shared across domains
    std::uint64_t seed = 1;
};

// Template-based stand-in corpus: every turn's user utterance verbalizes its
// turn label, gold states are exact folds of the labels, and cross-domain
// lexical overlap is controlled so zero-shot transfer is partial.
Corpus generate_synthetic_corpus(const SyntheticSpec& spec);

std::vector<std::string> domains_of(const Corpus& corpus);

}  // namespace dstlab
