#include "dstlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dstlab/rng.hpp"

namespace dstlab {

using nlohmann::json;

std::vector<const Dialogue*> Corpus::split_for(const std::string& split, const std::string& domain) const {
    const std::vector<Dialogue>* src = nullptr;
    if (split == "train") src = &train;
    else if (split == "dev") src = &dev;
    else if (split == "test") src = &test;
    else throw std::invalid_argument("corpus: unknown split '" + split + "'");
    std::vector<const Dialogue*> out;
    for (const Dialogue& d : *src) {
        if (domain.empty() || d.domain == domain) out.push_back(&d);
    }
    return out;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw std::runtime_error("corpus: " + where + ": " + what);
}

void reject_unknown_fields(const json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) fail(where, "unknown field '" + key + "'");
    }
}

std::vector<std::string> parse_tokens(const json& arr, const std::string& where) {
    if (!arr.is_array()) fail(where, "expected a token array");
    std::vector<std::string> out;
    for (const auto& t : arr) {
        if (!t.is_string()) fail(where, "token must be a string");
        out.push_back(t.get<std::string>());
    }
    return out;
}

std::vector<SlotValue> parse_pairs(const json& arr, const std::string& where) {
    if (!arr.is_array()) fail(where, "expected an array of [slot, value] pairs");
    std::vector<SlotValue> out;
    for (const auto& p : arr) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
            fail(where, "each entry must be a [slot, value] string pair");
        }
        out.push_back({p[0].get<std::string>(), p[1].get<std::string>()});
    }
    return out;
}

Dialogue parse_dialogue(const json& j, const std::string& split, std::size_t index) {
    const std::string where = "split '" + split + "' dialogue #" + std::to_string(index);
    if (!j.is_object()) fail(where, "expected an object");
    reject_unknown_fields(j, {"id", "domain", "turns"}, where);
    Dialogue d;
    if (!j.contains("id") || !j["id"].is_string()) fail(where, "missing string field 'id'");
    if (!j.contains("domain") || !j["domain"].is_string()) fail(where, "missing string field 'domain'");
    if (!j.contains("turns") || !j["turns"].is_array()) fail(where, "missing array field 'turns'");
    d.id = j["id"].get<std::string>();
    d.domain = j["domain"].get<std::string>();
    std::size_t ti = 0;
    for (const auto& tj : j["turns"]) {
        const std::string twhere = "dialogue '" + d.id + "' turn " + std::to_string(ti);
        if (!tj.is_object()) fail(twhere, "expected an object");
        reject_unknown_fields(tj, {"system_utterance", "user_utterance", "turn_label", "belief_state"}, twhere);
        for (const char* f : {"system_utterance", "user_utterance", "turn_label", "belief_state"}) {
            if (!tj.contains(f)) fail(twhere, std::string("missing field '") + f + "'");
        }
        Turn t;
        t.system_utterance = parse_tokens(tj["system_utterance"], twhere);
        t.user_utterance = parse_tokens(tj["user_utterance"], twhere);
        t.turn_label = parse_pairs(tj["turn_label"], twhere);
        std::sort(t.turn_label.begin(), t.turn_label.end());
        for (const auto& sv : parse_pairs(tj["belief_state"], twhere)) {
            if (t.belief_state.value_of(sv.slot).has_value()) {
                fail(twhere, "belief_state has duplicate slot '" + sv.slot + "'");
            }
            t.belief_state.set(sv.slot, sv.value);
        }
        d.turns.push_back(std::move(t));
        ++ti;
    }
    return d;
}

json pairs_to_json(const std::vector<SlotValue>& pairs) {
    json arr = json::array();
    for (const auto& sv : pairs) arr.push_back(json::array({sv.slot, sv.value}));
    return arr;
}

json dialogue_to_json(const Dialogue& d) {
    json turns = json::array();
    for (const Turn& t : d.turns) {
        json tj;
        tj["system_utterance"] = t.system_utterance;
        tj["user_utterance"] = t.user_utterance;
        tj["turn_label"] = pairs_to_json(t.turn_label);
        tj["belief_state"] = pairs_to_json(t.belief_state.to_pairs());
        turns.push_back(std::move(tj));
    }
    json dj;
    dj["id"] = d.id;
    dj["domain"] = d.domain;
    dj["turns"] = std::move(turns);
    return dj;
}

}  // namespace

void validate_corpus(const Corpus& corpus) {
    for (const auto& [domain, slots] : corpus.ontology.domains) {
        for (const auto& [slot, values] : slots) {
            if (values.empty()) {
                fail("ontology domain '" + domain + "'", "slot '" + slot + "' has an empty value list");
            }
            std::set<std::string> seen(values.begin(), values.end());
            if (seen.size() != values.size()) {
                fail("ontology domain '" + domain + "'", "slot '" + slot + "' has duplicate values");
            }
        }
    }

    std::set<std::string> ids;
    auto check_split = [&](const std::vector<Dialogue>& split, const std::string& name) {
        for (const Dialogue& d : split) {
            const std::string dwhere = "dialogue '" + d.id + "' (split " + name + ")";
            if (!ids.insert(d.id).second) fail(dwhere, "duplicate dialogue id across splits");
            if (d.turns.empty()) fail(dwhere, "dialogue has no turns");
            auto dom = corpus.ontology.domains.find(d.domain);
            if (dom == corpus.ontology.domains.end()) fail(dwhere, "unknown domain '" + d.domain + "'");
            BeliefState folded;
            for (std::size_t ti = 0; ti < d.turns.size(); ++ti) {
                const Turn& t = d.turns[ti];
                const std::string twhere = "dialogue '" + d.id + "' turn " + std::to_string(ti);
                std::set<std::string> label_slots;
                for (const auto& sv : t.turn_label) {
                    if (sv.slot.empty() || sv.value.empty()) fail(twhere, "empty slot or value");
                    if (!label_slots.insert(sv.slot).second) {
                        fail(twhere, "turn_label has duplicate slot '" + sv.slot + "'");
                    }
                    auto slot_it = dom->second.find(sv.slot);
                    if (slot_it == dom->second.end()) {
                        fail(twhere, "turn_label references unknown slot '" + sv.slot + "'");
                    }
                    const auto& vals = slot_it->second;
                    if (sv.value != kDelexToken &&
                        std::find(vals.begin(), vals.end(), sv.value) == vals.end()) {
                        fail(twhere, "value '" + sv.value + "' not in ontology for slot '" + sv.slot + "'");
                    }
                }
                folded.apply(t.turn_label);
                if (!(folded == t.belief_state)) {
                    fail(twhere, "belief_state is inconsistent with folded turn labels");
                }
            }
        }
    };
    check_split(corpus.train, "train");
    check_split(corpus.dev, "dev");
    check_split(corpus.test, "test");
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("corpus: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("corpus: parse error in '" + path + "': " + e.what());
    }
    if (!j.is_object()) fail(path, "top level must be an object");
    reject_unknown_fields(j, {"ontology", "train", "dev", "test"}, path);
    for (const char* f : {"ontology", "train", "dev", "test"}) {
        if (!j.contains(f)) fail(path, std::string("missing field '") + f + "'");
    }

    Corpus c;
    if (!j["ontology"].is_object()) fail(path, "'ontology' must be an object");
    for (const auto& [domain, slots] : j["ontology"].items()) {
        if (!slots.is_object()) fail(path, "ontology domain '" + domain + "' must map slots to value lists");
        for (const auto& [slot, values] : slots.items()) {
            if (!values.is_array()) fail(path, "ontology slot '" + slot + "' must list values");
            std::vector<std::string> vals;
            for (const auto& v : values) {
                if (!v.is_string()) fail(path, "ontology value must be a string");
                vals.push_back(v.get<std::string>());
            }
            c.ontology.domains[domain][slot] = std::move(vals);
        }
    }

    auto parse_split = [&](const char* name, std::vector<Dialogue>& out) {
        std::size_t i = 0;
        for (const auto& dj : j[name]) out.push_back(parse_dialogue(dj, name, i++));
    };
    parse_split("train", c.train);
    parse_split("dev", c.dev);
    parse_split("test", c.test);
    validate_corpus(c);
    return c;
}

std::string serialize_corpus(const Corpus& corpus) {
    json j;
    json ont = json::object();
    for (const auto& [domain, slots] : corpus.ontology.domains) {
        json sj = json::object();
        for (const auto& [slot, values] : slots) sj[slot] = values;
        ont[domain] = std::move(sj);
    }
    j["ontology"] = std::move(ont);
    const std::pair<const char*, const std::vector<Dialogue>*> splits[] = {
        {"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}};
    for (const auto& [name, split] : splits) {
        json arr = json::array();
        for (const Dialogue& d : *split) arr.push_back(dialogue_to_json(d));
        j[name] = std::move(arr);
    }
    return j.dump(1);
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("corpus: cannot write '" + path + "'");
    out << serialize_corpus(corpus) << '\n';
}

const std::vector<DelexPattern>& default_delex_patterns() {
    static const std::vector<DelexPattern> patterns = [] {
        std::vector<DelexPattern> p;
        auto mk = [&](const char* name, const char* re) {
            p.push_back({name, std::regex(re, std::regex::ECMAScript | std::regex::icase)});
        };
        mk("train_id", R"(^tr\d{3,5}$)");
        mk("time", R"(^\d{1,2}:\d{2}$)");
        mk("phone", R"(^\d{10,11}$)");
        mk("postcode", R"(^[a-z]{1,2}\d{1,2}[a-z]{2}$)");
        mk("reference", R"(^(?=.*\d)[a-z0-9]{7,9}$)");
        return p;
    }();
    return patterns;
}

std::vector<std::string> delexicalize(const std::vector<std::string>& tokens,
                                      const std::vector<DelexPattern>& patterns) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const std::string& tok : tokens) {
        bool matched = false;
        for (const DelexPattern& p : patterns) {
            if (std::regex_match(tok, p.matcher)) {
                matched = true;
                break;
            }
        }
        out.push_back(matched ? kDelexToken : tok);
    }
    return out;
}

std::vector<std::vector<SlotValue>> derive_turn_labels(const std::vector<BeliefState>& states) {
    if (states.empty()) {
        throw std::invalid_argument("derive_turn_labels: state sequence is empty");
    }
    std::vector<std::vector<SlotValue>> labels;
    labels.reserve(states.size());
    const BeliefState* prev = nullptr;
    for (const BeliefState& s : states) {
        std::vector<SlotValue> delta;
        for (const auto& [slot, value] : s.entries()) {
            if (prev == nullptr || prev->value_of(slot) != value) {
                delta.push_back({slot, value});
            }
        }
        labels.push_back(std::move(delta));
        prev = &s;
    }
    return labels;
}

Split split_corpus(std::vector<Dialogue> dialogues, SplitRatios ratios, std::uint64_t seed) {
    if (dialogues.size() < 3) {
        throw std::invalid_argument("split_corpus: need at least 3 dialogues");
    }
    if (!(ratios.train > 0 && ratios.dev > 0 && ratios.test > 0) ||
        std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
        throw std::invalid_argument("split_corpus: ratios must be positive and sum to 1");
    }
    Rng rng(derive_stream(seed, "split"));
    rng.shuffle(dialogues);
    const auto n = dialogues.size();
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train + 1e-9));
    const auto n_dev = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.dev + 1e-9));
    Split out;
    out.train.assign(dialogues.begin(), dialogues.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.dev.assign(dialogues.begin() + static_cast<std::ptrdiff_t>(n_train),
                   dialogues.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
    out.test.assign(dialogues.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), dialogues.end());
    return out;
}

namespace {

struct DomainLexicon {
    std::vector<std::string> slot_names;     // domain-qualified
    std::vector<std::string> slot_surfaces;  // token verbalizing the slot
    std::vector<std::vector<std::string>> values;
    std::vector<std::string> fillers;
};

DomainLexicon make_lexicon(const SyntheticSpec& spec, int d) {
    const int shared_slots = static_cast<int>(std::llround(spec.overlap * spec.slots_per_domain));
    const int shared_values = static_cast<int>(std::llround(spec.overlap * spec.values_per_slot));
    const int n_fillers = 10;
    const int shared_fillers = static_cast<int>(std::llround(spec.overlap * n_fillers));

    DomainLexicon lex;
    for (int k = 0; k < spec.slots_per_domain; ++k) {
        const std::string surface =
            k < shared_slots ? "aspect" + std::to_string(k)
                             : "d" + std::to_string(d) + "aspect" + std::to_string(k);
        lex.slot_surfaces.push_back(surface);
        lex.slot_names.push_back("dom" + std::to_string(d) + "-" + surface);
        std::vector<std::string> vals;
        for (int j = 0; j < spec.values_per_slot; ++j) {
            vals.push_back(j < shared_values
                               ? "item" + std::to_string(k) + "x" + std::to_string(j)
                               : "d" + std::to_string(d) + "item" + std::to_string(k) + "x" + std::to_string(j));
        }
        lex.values.push_back(std::move(vals));
    }
    for (int i = 0; i < n_fillers; ++i) {
        lex.fillers.push_back(i < shared_fillers ? "fill" + std::to_string(i)
                                                 : "d" + std::to_string(d) + "fill" + std::to_string(i));
    }
    return lex;
}

Dialogue make_dialogue(const SyntheticSpec& spec, const DomainLexicon& lex, int d, int i) {
    Rng rng(derive_stream(spec.seed, "dialogue", static_cast<std::uint64_t>(d) * 1000003ULL +
                                                     static_cast<std::uint64_t>(i)));
    Dialogue dlg;
    dlg.id = "dom" + std::to_string(d) + "-dlg" + std::to_string(i);
    dlg.domain = "dom" + std::to_string(d);

    std::vector<int> unused(static_cast<std::size_t>(spec.slots_per_domain));
    for (std::size_t k = 0; k < unused.size(); ++k) unused[k] = static_cast<int>(k);
    rng.shuffle(unused);

    BeliefState state;
    std::vector<int> prev_label_slots;
    for (int t = 0; t < spec.turns_per_dialogue; ++t) {
        Turn turn;
        if (t > 0 && !prev_label_slots.empty()) {
            turn.system_utterance = {"okay", lex.slot_surfaces[static_cast<std::size_t>(prev_label_slots[0])]};
        }

        int n_events = 1;
        if (unused.size() >= 2 && rng.uniform() < 0.25) n_events = 2;
        std::vector<int> slots_this_turn;
        for (int e = 0; e < n_events; ++e) {
            int k;
            std::string value;
            if (!unused.empty()) {
                k = unused.back();
                unused.pop_back();
                value = lex.values[static_cast<std::size_t>(k)][rng.below(lex.values[static_cast<std::size_t>(k)].size())];
            } else {
                // all slots introduced: change the value of a used slot
                do {
                    k = static_cast<int>(rng.below(static_cast<std::size_t>(spec.slots_per_domain)));
                } while (std::find(slots_this_turn.begin(), slots_this_turn.end(), k) != slots_this_turn.end());
                const auto& vals = lex.values[static_cast<std::size_t>(k)];
                const std::string current = *state.value_of(lex.slot_names[static_cast<std::size_t>(k)]);
                value = vals[rng.below(vals.size())];
                if (vals.size() > 1) {
                    while (value == current) value = vals[rng.below(vals.size())];
                }
            }
            slots_this_turn.push_back(k);
            turn.turn_label.push_back({lex.slot_names[static_cast<std::size_t>(k)], value});

            if (rng.uniform() < 0.7) turn.user_utterance.push_back(lex.fillers[rng.below(lex.fillers.size())]);
            turn.user_utterance.push_back(lex.slot_surfaces[static_cast<std::size_t>(k)]);
            turn.user_utterance.push_back(value);
        }
        if (rng.uniform() < 0.4) turn.user_utterance.push_back(lex.fillers[rng.below(lex.fillers.size())]);

        std::sort(turn.turn_label.begin(), turn.turn_label.end());
        state.apply(turn.turn_label);
        turn.belief_state = state;
        prev_label_slots = slots_this_turn;
        dlg.turns.push_back(std::move(turn));
    }
    return dlg;
}

}  // namespace

Corpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    if (spec.domains < 1 || spec.slots_per_domain < 1 || spec.values_per_slot < 1 ||
        spec.dialogues_per_domain < 1 || spec.turns_per_dialogue < 1) {
        throw std::invalid_argument("generate_synthetic_corpus: counts must be >= 1");
    }
    if (spec.overlap < 0.0 || spec.overlap > 1.0) {
        throw std::invalid_argument("generate_synthetic_corpus: overlap must be in [0, 1]");
    }

    Corpus corpus;
    for (int d = 0; d < spec.domains; ++d) {
        DomainLexicon lex = make_lexicon(spec, d);
        const std::string domain = "dom" + std::to_string(d);
        for (int k = 0; k < spec.slots_per_domain; ++k) {
            corpus.ontology.domains[domain][lex.slot_names[static_cast<std::size_t>(k)]] =
                lex.values[static_cast<std::size_t>(k)];
        }
        std::vector<Dialogue> dialogues;
        dialogues.reserve(static_cast<std::size_t>(spec.dialogues_per_domain));
        for (int i = 0; i < spec.dialogues_per_domain; ++i) {
            dialogues.push_back(make_dialogue(spec, lex, d, i));
        }
        if (spec.dialogues_per_domain >= 3) {
            Split split = split_corpus(std::move(dialogues), SplitRatios{},
                                       derive_stream(spec.seed, "domain-split", static_cast<std::uint64_t>(d)));
            corpus.train.insert(corpus.train.end(), split.train.begin(), split.train.end());
            corpus.dev.insert(corpus.dev.end(), split.dev.begin(), split.dev.end());
            corpus.test.insert(corpus.test.end(), split.test.begin(), split.test.end());
        } else {
            corpus.train.insert(corpus.train.end(), dialogues.begin(), dialogues.end());
        }
    }
    validate_corpus(corpus);
    return corpus;
}

std::vector<std::string> domains_of(const Corpus& corpus) {
    std::vector<std::string> out;
    for (const auto& [d, _] : corpus.ontology.domains) out.push_back(d);
    return out;
}

}  // namespace dstlab
