#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "stag/labelspace.hpp"

namespace stag {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TaggedSentence {
    std::vector<std::string> words;
    std::vector<std::string> gold_tags;
    std::string sentence_id;

    bool operator==(const TaggedSentence&) const = default;
};

struct TaskDataset {
    Task task = Task::POS;
    std::vector<TaggedSentence> train;
    std::vector<TaggedSentence> test;
    std::vector<std::string> label_inventory; // first-occurrence order, train then test

    bool operator==(const TaskDataset&) const = default;
};

struct DemonstrationSet {
    std::vector<TaggedSentence> sentences;
    size_t k = 0;
    uint64_t seed = 0;
    std::set<std::string> covered_labels;
};

// Reads a file, transparently gunzipping when the content is gzip-compressed.
std::string read_file_maybe_gzip(const std::string& path);

// CoNLL-U: 10 tab-separated columns, '#' comments, blank-line sentence
// breaks. Word = FORM (col 2), tag = UPOS (col 4). Multiword ranges
// ("3-4") and empty nodes ("5.1") are skipped.
std::vector<TaggedSentence> parse_conllu(const std::string& text);

// CoNLL-2000/2003: space-separated columns, blank-line sentence breaks,
// "-DOCSTART-" pseudo-sentences dropped. Word = col 0, tag = tag_column.
std::vector<TaggedSentence> parse_conll_columns(const std::string& text, size_t tag_column);

std::string serialize_conllu(const std::vector<TaggedSentence>& sentences);
std::string serialize_conll_columns(const std::vector<TaggedSentence>& sentences,
                                    size_t tag_column);

// Assembles the dataset and its observed label inventory from parsed splits.
TaskDataset make_dataset(Task task, std::vector<TaggedSentence> train,
                         std::vector<TaggedSentence> test);

// Plain-text key=value manifest: task, train_path, test_path, tag_column
// (tag_column only for the space-separated formats). Relative paths are
// resolved against the manifest's directory.
TaskDataset load_dataset(const std::string& manifest_path);

// Uniform k-subset of the train split, resampled up to max_attempts times
// until the sample covers the full label inventory; otherwise the best
// coverage seen wins. Deterministic in (dataset, k, seed).
DemonstrationSet sample_demonstrations(const TaskDataset& dataset, size_t k, uint64_t seed,
                                       size_t max_attempts = 100);

// Seeded uniform sample without replacement from the test split.
std::vector<TaggedSentence> sample_eval_subset(const TaskDataset& dataset, size_t n,
                                               uint64_t seed);

} // namespace stag
