#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stag/corpus.hpp"
#include "stag/labelspace.hpp"

namespace stag {

// A label searched for in the corpus. tab_anchored matches the literal
// "\t<label>\t" (treebank column form); space_token matches the label as a
// whitespace-delimited token.
struct ScanPattern {
    enum class Mode { tab_anchored, space_token };
    std::string label;
    Mode mode = Mode::tab_anchored;
};

// Patterns for a task's label surfaces. Single-character labels are
// excluded from frequency scanning.
std::vector<ScanPattern> patterns_for_task(Task task, const LabelSet& labels);

struct ContextSample {
    std::string label;
    size_t shard = 0;
    size_t offset = 0;
    std::string window;
    uint64_t priority = 0; // selection key; internal to the reservoir
};

struct LabelStats {
    uint64_t total = 0;
    uint64_t ud_format = 0; // tab_anchored hits whose line passes the UD shape test

    double ud_fraction() const {
        return total ? static_cast<double>(ud_format) / static_cast<double>(total) : 0.0;
    }
};

struct ScanReport {
    std::map<std::string, LabelStats> labels;
    std::map<std::string, std::vector<ContextSample>> samples;
    std::vector<std::string> skipped_shards;
    uint64_t invalid_utf8_sequences = 0;
    uint64_t bytes_scanned = 0;
    double seconds = 0.0;
};

struct ScanOptions {
    size_t window = 80; // context characters on each side of a hit
    size_t sample_cap = 10;
    uint64_t seed = 0;
    int workers = 1;
};

// Exact substring scan over corpus shards. Shards may be plain text, gzip,
// or JSON-lines with a "text" field. Deterministic in (corpus, patterns,
// seed) regardless of worker count: the context reservoir keeps the
// sample_cap hits with the smallest hashed priorities, which is a uniform
// subset and merges associatively.
ScanReport scan(const std::vector<std::string>& shard_paths,
                const std::vector<ScanPattern>& patterns, const ScanOptions& options);

// Single-threaded reference implementation with the same contract; kept as
// the oracle the parallel path is tested against.
ScanReport scan_serial(const std::vector<std::string>& shard_paths,
                       const std::vector<ScanPattern>& patterns, const ScanOptions& options);

// In-memory core, exposed for the oracle tests and the benchmark.
void scan_text(const std::string& text, size_t shard_index,
               const std::vector<ScanPattern>& patterns, const ScanOptions& options,
               ScanReport& into);

// Is this line shaped like a UD treebank row with the label in the UPOS
// column: >= 8 tab-separated fields, label at field index 3.
bool ud_format_line(const std::string& line, const std::string& label);

struct LeakageMatch {
    enum class Kind { text_substring, conllu_lines };
    Kind kind = Kind::text_substring;
    size_t shard = 0;
    size_t offset = 0;
    std::string sentence_id;
};

// Two detectors over the corpus: (a) the detokenized sentence text as a
// substring (whitespace-normalized on both sides); (b) >= 3 consecutive
// corpus lines matching consecutive tokens of one sentence in CoNLL-U
// column form.
std::vector<LeakageMatch> leakage_check(const std::vector<std::string>& shard_paths,
                                        const std::vector<TaggedSentence>& test_set,
                                        int workers = 1);

std::vector<LeakageMatch> leakage_check_text(const std::string& text, size_t shard_index,
                                             const std::vector<TaggedSentence>& test_set);

struct AttributionResult {
    // (treebank name, split) -> hit count
    std::map<std::pair<std::string, std::string>, uint64_t> counts;
    uint64_t unattributed = 0;
    uint64_t ambiguous = 0; // hits matching more than one treebank
};

// Matches each hit's token sequence against reference treebank sentences
// by normalized token-sequence equality.
AttributionResult treebank_attribution(
    const std::vector<std::vector<std::string>>& hit_token_sequences,
    const std::vector<std::pair<std::string, const TaskDataset*>>& treebanks);

// Token forms of the CoNLL-U-shaped block around a tab_anchored hit;
// empty when the surrounding lines are not treebank-shaped.
std::vector<std::string> extract_ud_tokens_at(const std::string& text, size_t hit_offset);

// Loads a shard, transparently gunzipping and unwrapping JSON-lines
// ("text" fields joined with newlines).
std::string load_shard(const std::string& path);

} // namespace stag
