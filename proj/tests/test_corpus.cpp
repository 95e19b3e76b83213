#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "dstlab/corpus.hpp"
#include "dstlab/rng.hpp"

using namespace dstlab;

namespace {

std::string write_temp(const std::string& contents) {
    static int counter = 0;
    std::string path = "corpus_test_" + std::to_string(counter++) + ".json";
    std::ofstream out(path);
    out << contents;
    return path;
}

const char* kWellFormed = R"({
 "ontology": {"food": {"food-dish": ["pasta", "soup"], "food-size": ["small", "large"]}},
 "train": [
  {"id": "a", "domain": "food", "turns": [
    {"system_utterance": [], "user_utterance": ["i", "want", "pasta"],
     "turn_label": [["food-dish", "pasta"]], "belief_state": [["food-dish", "pasta"]]},
    {"system_utterance": ["which", "size"], "user_utterance": ["large"],
     "turn_label": [["food-size", "large"]],
     "belief_state": [["food-dish", "pasta"], ["food-size", "large"]]}
  ]},
  {"id": "b", "domain": "food", "turns": [
    {"system_utterance": [], "user_utterance": ["soup", "please"],
     "turn_label": [["food-dish", "soup"]], "belief_state": [["food-dish", "soup"]]}
  ]}
 ],
 "dev": [], "test": []
})";

}  // namespace

TEST_CASE("load_corpus") {
    SUBCASE("well-formed two-dialogue file") {
        auto path = write_temp(kWellFormed);
        Corpus c = load_corpus(path);
        CHECK(c.train.size() == 2);
        CHECK(c.ontology.domains.at("food").size() == 2);
        CHECK(c.train[0].turns[1].belief_state.value_of("food-dish") == "pasta");
        std::remove(path.c_str());
    }
    SUBCASE("unknown slot in turn label is reported with its name") {
        std::string bad = kWellFormed;
        auto pos = bad.find("food-size\", \"large\"]], ");
        bad.replace(bad.find("[\"food-size\", \"large\"]],"), 24, "[\"food-color\", \"large\"]],");
        auto path = write_temp(bad);
        CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("food-color"), std::runtime_error);
        std::remove(path.c_str());
        (void)pos;
    }
    SUBCASE("belief state inconsistent with folded labels names the offending turn") {
        std::string bad = kWellFormed;
        // second turn of dialogue 'a' drops the carried-over dish entry
        bad.replace(bad.find("[[\"food-dish\", \"pasta\"], [\"food-size\", \"large\"]]"), 48,
                    "[[\"food-size\", \"large\"]]");
        auto path = write_temp(bad);
        CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("turn 1"), std::runtime_error);
        std::remove(path.c_str());
    }
    SUBCASE("unknown fields are rejected") {
        std::string bad = kWellFormed;
        bad.replace(bad.find("\"id\": \"a\""), 9, "\"id\": \"a\", \"mood\": 3");
        auto path = write_temp(bad);
        CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("mood"), std::runtime_error);
        std::remove(path.c_str());
    }
}

TEST_CASE("delexicalize") {
    const auto& pat = default_delex_patterns();
    SUBCASE("reference number") {
        auto out = delexicalize({"booked", "reference", "TX48291"}, pat);
        CHECK(out == std::vector<std::string>{"booked", "reference", "<delex>"});
    }
    SUBCASE("clock time") {
        auto out = delexicalize({"arrives", "at", "08:45"}, pat);
        CHECK(out == std::vector<std::string>{"arrives", "at", "<delex>"});
    }
    SUBCASE("train id, phone, postcode") {
        auto out = delexicalize({"tr1234", "01223364521", "cb21ab"}, pat);
        CHECK(out == std::vector<std::string>{"<delex>", "<delex>", "<delex>"});
    }
    SUBCASE("no generated tokens is the identity") {
        std::vector<std::string> in = {"i", "want", "cheap", "food"};
        CHECK(delexicalize(in, pat) == in);
    }
    SUBCASE("idempotence on random-ish utterances") {
        std::vector<std::vector<std::string>> cases = {
            {"ref", "ab12cd34", "at", "9:05"},
            {"call", "07700900123", "today"},
            {"<delex>", "already"},
        };
        for (const auto& tokens : cases) {
            auto once = delexicalize(tokens, pat);
            CHECK(delexicalize(once, pat) == once);
            CHECK(once.size() == tokens.size());
        }
    }
}

TEST_CASE("derive_turn_labels") {
    auto st = [](std::vector<SlotValue> pairs) {
        BeliefState b;
        b.apply(pairs);
        return b;
    };
    SUBCASE("pure addition") {
        auto labels = derive_turn_labels({st({{"a", "1"}}), st({{"a", "1"}, {"b", "2"}})});
        CHECK(labels[0] == std::vector<SlotValue>{{"a", "1"}});
        CHECK(labels[1] == std::vector<SlotValue>{{"b", "2"}});
    }
    SUBCASE("value change reappears with the new value") {
        auto labels = derive_turn_labels({st({{"a", "1"}}), st({{"a", "3"}})});
        CHECK(labels[0] == std::vector<SlotValue>{{"a", "1"}});
        CHECK(labels[1] == std::vector<SlotValue>{{"a", "3"}});
    }
    SUBCASE("folding the labels reproduces every state") {
        Rng rng(5);
        std::vector<std::string> slots = {"a", "b", "c", "d"};
        std::vector<std::string> vals = {"1", "2", "3"};
        for (int rep = 0; rep < 30; ++rep) {
            std::vector<BeliefState> states;
            BeliefState cur;
            for (int t = 0; t < 5; ++t) {
                cur.set(slots[rng.below(slots.size())], vals[rng.below(vals.size())]);
                states.push_back(cur);
            }
            auto labels = derive_turn_labels(states);
            BeliefState folded;
            for (std::size_t t = 0; t < states.size(); ++t) {
                folded.apply(labels[t]);
                CHECK(folded == states[t]);
            }
        }
    }
    SUBCASE("empty sequence is rejected") {
        CHECK_THROWS_AS(derive_turn_labels({}), std::invalid_argument);
    }
}

namespace {
std::vector<Dialogue> toy_dialogues(int n) {
    std::vector<Dialogue> out;
    for (int i = 0; i < n; ++i) {
        Dialogue d;
        d.id = "dlg" + std::to_string(i);
        d.domain = "dom0";
        d.turns.emplace_back();
        out.push_back(d);
    }
    return out;
}

std::set<std::string> ids_of(const std::vector<Dialogue>& ds) {
    std::set<std::string> out;
    for (const auto& d : ds) out.insert(d.id);
    return out;
}
}  // namespace

TEST_CASE("split_corpus") {
    SUBCASE("10 dialogues at 0.8/0.1/0.1 gives sizes 8/1/1") {
        Split s = split_corpus(toy_dialogues(10), {}, 7);
        CHECK(s.train.size() == 8);
        CHECK(s.dev.size() == 1);
        CHECK(s.test.size() == 1);
    }
    SUBCASE("same seed reproduces the same split; partition holds") {
        Split a = split_corpus(toy_dialogues(100), {}, 7);
        Split b = split_corpus(toy_dialogues(100), {}, 7);
        CHECK(ids_of(a.train) == ids_of(b.train));
        CHECK(ids_of(a.dev) == ids_of(b.dev));
        CHECK(ids_of(a.test) == ids_of(b.test));

        std::set<std::string> all = ids_of(a.train);
        for (const auto& id : ids_of(a.dev)) CHECK(all.insert(id).second);
        for (const auto& id : ids_of(a.test)) CHECK(all.insert(id).second);
        CHECK(all.size() == 100);
    }
    SUBCASE("different seeds permute differently") {
        Split a = split_corpus(toy_dialogues(100), {}, 7);
        Split b = split_corpus(toy_dialogues(100), {}, 8);
        CHECK(ids_of(a.train) != ids_of(b.train));
    }
    SUBCASE("fewer than 3 dialogues is rejected") {
        CHECK_THROWS_AS(split_corpus(toy_dialogues(2), {}, 7), std::invalid_argument);
    }
}

TEST_CASE("generate_synthetic_corpus") {
    SUBCASE("counts and invariants") {
        SyntheticSpec spec;
        spec.domains = 2;
        spec.slots_per_domain = 3;
        spec.values_per_slot = 5;
        spec.dialogues_per_domain = 50;
        spec.turns_per_dialogue = 6;
        spec.overlap = 0.5;
        spec.seed = 1;
        Corpus c = generate_synthetic_corpus(spec);  // validates internally
        CHECK(c.train.size() + c.dev.size() + c.test.size() == 100);
        CHECK(c.ontology.domains.size() == 2);
        for (const auto& d : c.train) {
            CHECK(d.turns.size() == 6);
            BeliefState folded;
            for (const auto& t : d.turns) {
                CHECK(!t.turn_label.empty());
                folded.apply(t.turn_label);
            }
            CHECK(folded == d.turns.back().belief_state);
        }
    }
    SUBCASE("full overlap shares everything but slot names") {
        SyntheticSpec spec;
        spec.domains = 2;
        spec.dialogues_per_domain = 4;
        spec.overlap = 1.0;
        Corpus c = generate_synthetic_corpus(spec);
        const auto& d0 = c.ontology.domains.at("dom0");
        const auto& d1 = c.ontology.domains.at("dom1");
        auto values_of = [](const std::map<std::string, std::vector<std::string>>& m) {
            std::vector<std::vector<std::string>> vals;
            for (const auto& [_, v] : m) vals.push_back(v);
            return vals;
        };
        CHECK(values_of(d0) == values_of(d1));
        std::set<std::string> names0, names1;
        for (const auto& [s, _] : d0) names0.insert(s);
        for (const auto& [s, _] : d1) names1.insert(s);
        CHECK(names0 != names1);
    }
    SUBCASE("regeneration is byte identical") {
        SyntheticSpec spec;
        spec.dialogues_per_domain = 10;
        const std::string a = serialize_corpus(generate_synthetic_corpus(spec));
        const std::string b = serialize_corpus(generate_synthetic_corpus(spec));
        CHECK(a == b);
    }
    SUBCASE("round-trips through save/load") {
        SyntheticSpec spec;
        spec.dialogues_per_domain = 6;
        Corpus c = generate_synthetic_corpus(spec);
        auto path = write_temp(serialize_corpus(c));
        Corpus reloaded = load_corpus(path);
        CHECK(serialize_corpus(reloaded) == serialize_corpus(c));
        std::remove(path.c_str());
    }
    SUBCASE("bad parameters rejected") {
        SyntheticSpec spec;
        spec.overlap = 1.5;
        CHECK_THROWS_AS(generate_synthetic_corpus(spec), std::invalid_argument);
        spec.overlap = 0.5;
        spec.domains = 0;
        CHECK_THROWS_AS(generate_synthetic_corpus(spec), std::invalid_argument);
    }
}
