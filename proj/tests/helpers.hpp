#pragma once

#include <string>
#include <vector>

#include "stag/corpus.hpp"
#include "stag/labelspace.hpp"
#include "stag/rng.hpp"

namespace testutil {

inline stag::TaggedSentence sent(std::string id, std::vector<std::string> words,
                                 std::vector<std::string> tags) {
    stag::TaggedSentence s;
    s.sentence_id = std::move(id);
    s.words = std::move(words);
    s.gold_tags = std::move(tags);
    return s;
}

// Tiny POS dataset: deterministic, every word always carries one tag.
inline stag::TaskDataset toy_pos() {
    std::vector<stag::TaggedSentence> train = {
        sent("t1", {"The", "dog", "barks"}, {"DET", "NOUN", "VERB"}),
        sent("t2", {"A", "cat", "sleeps"}, {"DET", "NOUN", "VERB"}),
        sent("t3", {"Dogs", "bark", "loudly"}, {"NOUN", "VERB", "ADV"}),
        sent("t4", {"She", "runs"}, {"PRON", "VERB"}),
    };
    std::vector<stag::TaggedSentence> test = {
        sent("e1", {"The", "cat", "barks"}, {"DET", "NOUN", "VERB"}),
        sent("e2", {"Dogs", "runs"}, {"NOUN", "VERB"}),
        sent("e3", {"She", "sleeps", "loudly"}, {"PRON", "VERB", "ADV"}),
    };
    return stag::make_dataset(stag::Task::POS, train, test);
}

// Synthetic POS dataset over a vocabulary where word "w<i>" always carries
// the tag classes[i % |classes|]; the per-word majority tagging of the
// train split is therefore exact on every test token.
inline stag::TaskDataset synth_pos(size_t n_train, size_t n_test, uint64_t seed,
                                   size_t vocab = 200) {
    const stag::LabelSet labels = stag::original_labels(stag::Task::POS);
    stag::Rng rng(seed);
    auto make_split = [&](size_t n, const std::string& prefix) {
        std::vector<stag::TaggedSentence> out;
        for (size_t i = 0; i < n; ++i) {
            const size_t len = 3 + rng.below(8);
            stag::TaggedSentence s;
            s.sentence_id = prefix + std::to_string(i);
            for (size_t j = 0; j < len; ++j) {
                const size_t w = rng.below(vocab);
                s.words.push_back("w" + std::to_string(w));
                s.gold_tags.push_back(labels.classes[w % labels.classes.size()]);
            }
            out.push_back(std::move(s));
        }
        return out;
    };
    return stag::make_dataset(stag::Task::POS, make_split(n_train, "tr"),
                              make_split(n_test, "te"));
}

// Random BIO tag sequence over two entity types; deliberately includes
// invalid transitions (I-X openers, type switches).
inline std::vector<std::string> random_bio(stag::Rng& rng, size_t len) {
    static const std::vector<std::string> tags = {"O", "B-PER", "I-PER", "B-LOC", "I-LOC"};
    std::vector<std::string> out;
    for (size_t i = 0; i < len; ++i) {
        out.push_back(tags[rng.below(tags.size())]);
    }
    return out;
}

// Independent port of the conlleval counting loop (start/end-of-chunk
// predicates over IOB tags). Used as the oracle for span_f1; kept
// structurally unrelated to the library's span extraction.
struct ConllevalCounts {
    size_t correct = 0;
    size_t found_gold = 0;
    size_t found_pred = 0;
};

namespace detail {

inline void split_tag(const std::string& tag, std::string& prefix, std::string& type) {
    if (tag == "O" || tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') {
        prefix = "O";
        type = "";
    } else {
        prefix = tag.substr(0, 1);
        type = tag.substr(2);
    }
}

inline bool start_of_chunk(const std::string& prev_p, const std::string& p,
                           const std::string& prev_t, const std::string& t) {
    if (p == "B" && (prev_p == "B" || prev_p == "I" || prev_p == "O")) {
        return true;
    }
    if (p == "I" && prev_p == "O") {
        return true;
    }
    return p != "O" && prev_p != "O" && prev_t != t;
}

inline bool end_of_chunk(const std::string& prev_p, const std::string& p,
                         const std::string& prev_t, const std::string& t) {
    if (prev_p == "O") {
        return false;
    }
    if (p == "O" || p == "B") {
        return true;
    }
    return prev_t != t;
}

} // namespace detail

inline ConllevalCounts conlleval_count(const std::vector<std::vector<std::string>>& gold,
                                       const std::vector<std::vector<std::string>>& pred) {
    ConllevalCounts c;
    for (size_t s = 0; s < gold.size(); ++s) {
        std::string pg = "O", tg, pp = "O", tp;
        std::string last_gold_type, last_pred_type;
        bool in_correct = false;
        // virtual trailing O closes any open chunk
        for (size_t i = 0; i <= gold[s].size(); ++i) {
            std::string gp = "O", gt, qp = "O", qt;
            if (i < gold[s].size()) {
                detail::split_tag(gold[s][i], gp, gt);
                detail::split_tag(pred[s][i], qp, qt);
            }
            const bool end_g = detail::end_of_chunk(pg, gp, tg, gt);
            const bool end_p = detail::end_of_chunk(pp, qp, tp, qt);
            const bool start_g = detail::start_of_chunk(pg, gp, tg, gt);
            const bool start_p = detail::start_of_chunk(pp, qp, tp, qt);
            if (in_correct) {
                if (end_g && end_p && last_gold_type == last_pred_type) {
                    in_correct = false;
                    ++c.correct;
                } else if (end_g != end_p || qt != gt) {
                    in_correct = false;
                }
            }
            if (start_g && start_p && gt == qt) {
                in_correct = true;
            }
            if (start_g) {
                ++c.found_gold;
                last_gold_type = gt;
            }
            if (start_p) {
                ++c.found_pred;
                last_pred_type = qt;
            }
            pg = gp;
            tg = gt;
            pp = qp;
            tp = qt;
        }
    }
    return c;
}

struct PRF {
    double precision, recall, f1;
};

inline PRF conlleval_scores(const std::vector<std::vector<std::string>>& gold,
                            const std::vector<std::vector<std::string>>& pred) {
    const ConllevalCounts c = conlleval_count(gold, pred);
    PRF out{0.0, 0.0, 0.0};
    if (c.found_pred) {
        out.precision = static_cast<double>(c.correct) / static_cast<double>(c.found_pred);
    }
    if (c.found_gold) {
        out.recall = static_cast<double>(c.correct) / static_cast<double>(c.found_gold);
    }
    if (out.precision + out.recall > 0) {
        out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
    }
    return out;
}

} // namespace testutil
