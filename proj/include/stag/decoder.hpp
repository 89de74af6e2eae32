#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stag/backend.hpp"
#include "stag/corpus.hpp"
#include "stag/labelspace.hpp"
#include "stag/metrics.hpp"
#include "stag/prompt.hpp"

namespace stag {

struct DecodeConfig {
    bool constrained = true;
    bool enforce_bio = true; // only meaningful for BIO label sets
    LabelSet label_set;
    PromptConfig prompt_config;
    int max_gen_tokens = 512; // unconstrained mode token budget

    void validate() const;
};

struct StepRecord {
    std::string word;
    std::vector<std::string> allowed; // classes, inventory order
    std::vector<double> mean_logprobs; // aligned with allowed
    std::string chosen;
};

struct DecodeTrace {
    std::vector<StepRecord> steps;
    std::optional<size_t> format_error_position; // unconstrained mode only
};

struct DecodeOutput {
    std::vector<std::string> tags;
    DecodeTrace trace;
};

// Structured prompting over one sentence: one session, append-only prefix,
// greedy argmax by mean logprob over the allowed label surfaces at each
// step, ties broken by inventory order, predictions fed back into the
// context.
DecodeOutput tag_sentence(Backend& backend, const std::vector<TaggedSentence>& demonstrations,
                          const TaggedSentence& sentence, const DecodeConfig& config);

// Single greedy generation of the whole Tagged line, parsed back into
// word<delim>surface pairs; parsing stops at the first pair whose word or
// surface does not match, recording the position.
DecodeOutput tag_sentence_unconstrained(Backend& backend,
                                        const std::vector<TaggedSentence>& demonstrations,
                                        const TaggedSentence& sentence,
                                        const DecodeConfig& config);

struct ExperimentConfig {
    size_t k = 10;
    size_t m = 5;
    size_t n_eval = 1000;
    uint64_t eval_seed = 0;
    std::vector<uint64_t> demo_seeds; // one per run; filled from base_seed when empty
    uint64_t base_seed = 0;
    size_t max_attempts = 100;
    DecodeConfig decode;
    int workers = 1;
    bool keep_traces = false;

    std::vector<uint64_t> effective_demo_seeds() const;
};

// m runs over a fixed eval subset, varying the demonstration seed per run.
// A backend failure marks that run failed; remaining runs still execute.
std::vector<RunResult> run_experiment(Backend& backend, const TaskDataset& dataset,
                                      const ExperimentConfig& config);

// Fills token accuracy, span scores, tallies and the confusion matrix of a
// run whose sentences/predictions are populated.
void score_run(RunResult& run, const LabelSet& labels, bool bio_metric);

// One line per token: sentence_id, index, word, gold class, predicted class.
std::string format_predictions_tsv(const RunResult& run);
RunResult parse_predictions_tsv(const std::string& text);

} // namespace stag
