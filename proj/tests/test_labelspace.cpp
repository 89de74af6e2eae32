#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "stag/labelspace.hpp"

using namespace stag;

namespace {
const std::string kWordsPos = std::string(STAG_SOURCE_DIR) + "/data/words_pos.tsv";
const std::string kWordsNer = std::string(STAG_SOURCE_DIR) + "/data/words_ner.tsv";
} // namespace

TEST_CASE("task round trip") {
    CHECK(task_from_string("pos") == Task::POS);
    CHECK(task_from_string("chunk") == Task::CHUNK);
    CHECK(task_from_string("ner") == Task::NER);
    CHECK(to_string(Task::NER) == "NER");
    CHECK(task_from_string(to_string(Task::NER)) == Task::NER);
    CHECK_THROWS(task_from_string("parsing"));
}

TEST_CASE("original POS inventory") {
    const LabelSet s = original_labels(Task::POS);
    CHECK(s.classes.size() == 17);
    for (const char* c : {"NOUN", "AUX", "CCONJ", "DET", "VERB", "X"}) {
        CHECK(s.contains(c));
    }
    CHECK(s.surface("DET") == "DET"); // identity verbalizer
    CHECK_FALSE(s.bio);
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("original NER inventory") {
    const LabelSet s = original_labels(Task::NER);
    CHECK(s.classes.size() == 9);
    CHECK(s.contains("O"));
    for (const char* t : {"PER", "ORG", "LOC", "MISC"}) {
        CHECK(s.contains(std::string("B-") + t));
        CHECK(s.contains(std::string("I-") + t));
    }
    CHECK(s.bio);
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("chunk inventory comes from data") {
    const std::vector<std::string> inv = {"B-NP", "I-NP", "B-VP", "I-VP", "O"};
    const LabelSet s = original_labels(Task::CHUNK, inv);
    // normalized ordering: "O" first, then B-/I- pairs by first occurrence
    CHECK(s.classes ==
          (std::vector<std::string>{"O", "B-NP", "I-NP", "B-VP", "I-VP"}));
    CHECK(s.bio);
    CHECK_THROWS(original_labels(Task::CHUNK)); // no fixed inventory
}

TEST_CASE("parse_bio") {
    CHECK(parse_bio("O").is_outside);
    const BioTag t = parse_bio("B-PER");
    CHECK(t.prefix == 'B');
    CHECK(t.type == "PER");
    CHECK(parse_bio("I-NP").prefix == 'I');
    CHECK_THROWS(parse_bio("PER"));
    CHECK_THROWS(parse_bio("Q-PER"));
    CHECK_THROWS(parse_bio("B-"));
}

TEST_CASE("shuffle of two classes is the swap") {
    LabelSet base;
    base.classes = {"A", "B"};
    base.surfaces = {{"A", "A"}, {"B", "B"}};
    const LabelSet sh = shuffle_labels(base, 7);
    CHECK(sh.surface("A") == "B");
    CHECK(sh.surface("B") == "A");
    CHECK(sh.variant == LabelVariant::shuffled);
}

TEST_CASE("shuffle is a derangement with the same classes and surfaces") {
    const LabelSet base = original_labels(Task::POS);
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const LabelSet sh = shuffle_labels(base, seed);
        CHECK(sh.classes == base.classes);
        std::set<std::string> orig_surfaces, shuf_surfaces;
        for (const auto& c : base.classes) {
            orig_surfaces.insert(base.surface(c));
            shuf_surfaces.insert(sh.surface(c));
            CHECK(sh.surface(c) != base.surface(c)); // no fixed points
        }
        CHECK(orig_surfaces == shuf_surfaces); // permutation of the same forms
        CHECK_NOTHROW(sh.validate());
    }
}

TEST_CASE("shuffle composed with its inverse is the identity") {
    const LabelSet base = original_labels(Task::NER);
    const LabelSet sh = shuffle_labels(base, 3);
    // invert: surface s belongs to class pi(c); map back
    std::map<std::string, std::string> inverse; // shuffled surface -> class
    for (const auto& c : sh.classes) {
        inverse[sh.surface(c)] = c;
    }
    for (const auto& c : base.classes) {
        // class whose shuffled surface is c's original surface
        const std::string& donor = inverse.at(base.surface(c));
        CHECK(sh.surface(donor) == base.surface(c));
    }
    CHECK(shuffle_labels(base, 3).surfaces == sh.surfaces); // seeded determinism
    CHECK_THROWS(shuffle_labels(sh, 4)); // only the original variant shuffles
}

TEST_CASE("proxy POS surfaces are 11..27") {
    const LabelSet base = original_labels(Task::POS);
    const LabelSet p = proxy_labels(base);
    std::set<std::string> surfaces;
    for (size_t i = 0; i < p.classes.size(); ++i) {
        CHECK(p.surface(p.classes[i]) == std::to_string(11 + static_cast<int>(i)));
        surfaces.insert(p.surface(p.classes[i]));
    }
    CHECK(surfaces.size() == 17);
    CHECK(*surfaces.begin() == "11");
    CHECK(p.surface(p.classes.back()) == "27");
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("proxy NER numbers entity types, keeps BIO scaffolding") {
    const LabelSet base = original_labels(Task::NER);
    const LabelSet p = proxy_labels(base);
    CHECK(p.surface("O") == "O");
    // type integers 11..14 assigned in first-appearance order of the types
    std::map<std::string, std::string> type_surface;
    for (const auto& c : p.classes) {
        if (c == "O") {
            continue;
        }
        const BioTag t = parse_bio(c);
        const std::string s = p.surface(c);
        CHECK(s.substr(0, 2) == std::string(1, t.prefix) + "-");
        type_surface[t.type] = s.substr(2);
    }
    std::set<std::string> ints;
    for (const auto& [type, num] : type_surface) {
        ints.insert(num);
    }
    CHECK(ints == std::set<std::string>{"11", "12", "13", "14"});
    // B-X and I-X share the type integer
    CHECK(p.surface("B-PER").substr(2) == p.surface("I-PER").substr(2));
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("words variant from the shipped tables") {
    const LabelSet pos = words_labels(original_labels(Task::POS), kWordsPos);
    CHECK(pos.surface("ADJ") == "adjective");
    CHECK(pos.surface("NOUN") == "noun");
    CHECK(pos.surface("AUX") == "auxiliary");
    CHECK_NOTHROW(pos.validate());

    const LabelSet ner = words_labels(original_labels(Task::NER), kWordsNer);
    CHECK(ner.surface("B-LOC") == "B-location");
    CHECK(ner.surface("I-PER") == "I-person");
    CHECK(ner.surface("O") == "O");
    CHECK_NOTHROW(ner.validate());
    CHECK_THROWS(words_labels(original_labels(Task::POS), "/nonexistent/words.tsv"));
}

TEST_CASE("verbalizer bijectivity is enforced") {
    LabelSet bad;
    bad.classes = {"A", "B"};
    bad.surfaces = {{"A", "x"}, {"B", "x"}};
    CHECK_THROWS(bad.validate());
    CHECK(original_labels(Task::POS).class_of_surface("NOUN") == std::string("NOUN"));
    CHECK_FALSE(original_labels(Task::POS).class_of_surface("nope").has_value());
}

TEST_CASE("bio_allowed rule applications") {
    const LabelSet ner = original_labels(Task::NER);
    const BioAutomaton a(ner);

    auto allowed_set = [&](const std::optional<std::string>& prev) {
        const auto v = a.allowed(prev);
        return std::set<std::string>(v.begin(), v.end());
    };

    const auto at_start = allowed_set(std::nullopt);
    CHECK(at_start.count("I-PER") == 0);
    CHECK(at_start.count("B-PER") == 1);
    CHECK(at_start.count("O") == 1);

    const auto after_bper = allowed_set(std::string("B-PER"));
    CHECK(after_bper.count("I-PER") == 1);
    CHECK(after_bper.count("I-LOC") == 0);

    const auto after_o = allowed_set(std::string("O"));
    CHECK(after_o.size() == 5); // O + 4 B-types
    CHECK(after_o.count("O") == 1);
    for (const char* t : {"B-PER", "B-ORG", "B-LOC", "B-MISC"}) {
        CHECK(after_o.count(t) == 1);
    }

    CHECK(a.transition_ok(std::string("I-PER"), "I-PER"));
    CHECK_FALSE(a.transition_ok(std::string("O"), "I-PER"));
    CHECK_THROWS((void)a.allowed(std::string("B-GPE")));
}

TEST_CASE("allowed classes come back in inventory order") {
    const LabelSet ner = original_labels(Task::NER);
    const BioAutomaton a(ner);
    const auto v = a.allowed(std::string("B-PER"));
    std::vector<size_t> ranks;
    for (const auto& c : v) {
        ranks.push_back(ner.index_of(c));
    }
    CHECK(std::is_sorted(ranks.begin(), ranks.end()));
}

namespace {
// Naive acceptor: a sequence is valid iff every I-X is preceded by a
// contiguous B-X/I-X run of the same type.
bool naive_valid(const std::vector<std::string>& tags) {
    for (size_t i = 0; i < tags.size(); ++i) {
        if (tags[i].size() > 1 && tags[i][0] == 'I') {
            if (i == 0) {
                return false;
            }
            const std::string& prev = tags[i - 1];
            if (prev == "O") {
                return false;
            }
            if (prev.substr(2) != tags[i].substr(2)) {
                return false;
            }
        }
    }
    return true;
}
} // namespace

TEST_CASE("acceptor agrees with brute force over all short sequences") {
    LabelSet two;
    two.classes = {"O", "B-A", "I-A", "B-B", "I-B"};
    for (const auto& c : two.classes) {
        two.surfaces[c] = c;
    }
    two.bio = true;
    const BioAutomaton a(two);
    const size_t n = two.classes.size();
    for (size_t len = 0; len <= 5; ++len) {
        size_t total = 1;
        for (size_t i = 0; i < len; ++i) {
            total *= n;
        }
        for (size_t code = 0; code < total; ++code) {
            std::vector<std::string> seq;
            size_t x = code;
            for (size_t i = 0; i < len; ++i) {
                seq.push_back(two.classes[x % n]);
                x /= n;
            }
            CHECK(a.accepts(seq) == naive_valid(seq));
        }
    }
}

TEST_CASE("variant names round trip") {
    for (auto v : {LabelVariant::original, LabelVariant::shuffled, LabelVariant::proxy,
                   LabelVariant::words}) {
        CHECK(variant_from_string(to_string(v)) == v);
    }
    CHECK_THROWS(variant_from_string("emoji"));
}
